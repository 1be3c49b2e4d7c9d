//! Riemannian trust-region iterations for both discretizations of one problem.
//!
//! ```text
//! cargo run --release --example trust_region -- p2b 5
//! ```

use harmap::energy::{constraint_violation, DiscretizationKind};
use harmap::harness::{solve_level, RunConfig};
use harmap::solvers::SolverKind;

fn main() -> harmap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let problem = args.first().map_or("p2b", String::as_str).parse()?;
    let level: u32 = args.get(1).map_or(5, |s| s.parse().expect("level"));

    for kind in [DiscretizationKind::Nonconforming, DiscretizationKind::Projection] {
        let cfg = RunConfig::new(problem, kind, SolverKind::TrustRegion)
            .levels(level, level)
            .resolve()?;
        let (_, trace) = solve_level(&cfg, level)?;
        println!("{problem} {kind} r={level}: E[u0] = {:.6}", trace.initial_energy);
        for r in &trace.records {
            println!(
                "  {:>2} E {:.8}  rho {:>8.4}  radius {:.3e}  |phi|_* {:.3e}  cg {:>3}{}",
                r.iteration,
                r.energy,
                r.rho.unwrap_or(f64::NAN),
                r.radius.unwrap_or(f64::NAN),
                r.correction_norm,
                r.inner_iterations,
                if r.accepted { "" } else { "  rejected" }
            );
        }
        println!(
            "  max nodal unit defect {:.1e}, delta1 {:.1e}",
            trace.field.max_unit_defect(),
            constraint_violation(&trace.field).delta1
        );
    }
    Ok(())
}

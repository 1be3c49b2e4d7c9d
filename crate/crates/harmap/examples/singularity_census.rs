//! Minimize the degree-kappa boundary problem and count the point
//! singularities of the minimizer.
//!
//! ```text
//! cargo run --release --example singularity_census -- 3 nc 3
//! ```

use harmap::census::singularity_census;
use harmap::harness::{solve_level, RunConfig};
use harmap::problems::ProblemId;
use harmap::solvers::SolverKind;

fn main() -> harmap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kappa: u32 = args.first().map_or(3, |s| s.parse().expect("kappa"));
    let kind = args.get(1).map_or("nc", String::as_str).parse()?;
    let level: u32 = args.get(2).map_or(3, |s| s.parse().expect("level"));

    let cfg = RunConfig::new(ProblemId::P3(kappa), kind, SolverKind::TrustRegion)
        .levels(level, level)
        .resolve()?;
    let (_, trace) = solve_level(&cfg, level)?;
    let field = &trace.field;
    println!(
        "p3k{kappa} {kind} r={level}: E {:.5} -> {:.5} in {} iterations",
        trace.initial_energy,
        trace.final_energy(),
        trace.iterations()
    );
    let found = singularity_census(field)?;
    println!("{} singularities", found.len());
    for s in &found {
        println!(
            "  degree {:+} (raw {:+.4}) at ({:+.3}, {:+.3}, {:+.3}), {} elements",
            s.degree, s.raw_degree, s.location[0], s.location[1], s.location[2], s.elements
        );
    }
    Ok(())
}

//! Tangential gradient flow on the smooth two-dimensional problem, printing
//! the energy and the constraint violation as the iteration proceeds.
//!
//! ```text
//! cargo run --release --example gradient_flow -- 5
//! ```

use harmap::energy::DiscretizationKind::Nonconforming;
use harmap::harness::{solve_level, RunConfig};
use harmap::mesh::build_uniform_mesh;
use harmap::problems::ProblemId;
use harmap::solvers::SolverKind;

fn main() -> harmap::Result<()> {
    let level: u32 = std::env::args().nth(1).map_or(5, |s| s.parse().expect("level"));
    let cfg = RunConfig::new(ProblemId::P1, Nonconforming, SolverKind::GradientFlow)
        .levels(level, level)
        .resolve()?;
    let (_, trace) = solve_level(&cfg, level)?;

    let h = build_uniform_mesh(2, level)?.mesh_size();
    let bound = cfg.tau_factor * h * trace.initial_energy;
    println!("r = {level}, tau = {:.4e}, E[u0] = {:.5}", cfg.tau_factor * h, trace.initial_energy);
    println!("{:>5} {:>10} {:>12} {:>12} {:>6}", "k", "E", "|d_t u|_*", "constraint", "cg");
    let stride = (trace.iterations() / 20).max(1);
    for r in trace.records.iter().filter(|r| r.iteration % stride == 0 || r.iteration + 1 == trace.iterations()) {
        println!(
            "{:>5} {:>10.6} {:>12.4e} {:>12.4e} {:>6}",
            r.iteration, r.energy, r.correction_norm, r.constraint, r.inner_iterations
        );
    }
    println!(
        "converged {} after {} steps; max constraint {:.4e} <= tau E[u0] = {:.4e}",
        trace.converged,
        trace.iterations(),
        trace.max_constraint(),
        bound
    );
    Ok(())
}

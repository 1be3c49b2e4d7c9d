//! Run a short sweep and write table.csv, report.json and one VTK file per level.
//!
//! ```text
//! cargo run --release --example report_files -- out/p2b
//! ```

use std::path::PathBuf;

use harmap::energy::DiscretizationKind;
use harmap::harness::{emit_report, format_table, read_report, run_benchmark, RunConfig};
use harmap::problems::ProblemId;
use harmap::solvers::SolverKind;

fn main() -> harmap::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "harmap-out/p2b".into()));
    let mut cfg = RunConfig::new(ProblemId::P2b, DiscretizationKind::Projection, SolverKind::TrustRegion).levels(1, 5);
    cfg.output_dir = Some(dir.clone());
    cfg.emit_vtk = true;

    let report = run_benchmark(&cfg)?;
    emit_report(&report, &dir)?;
    print!("{}", format_table(&report));

    let back = read_report(&dir.join("report.json"))?;
    assert_eq!(back, report);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|source| harmap::Error::Io { path: dir.clone(), source })?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("{}: {}", dir.display(), files.join(", "));
    Ok(())
}

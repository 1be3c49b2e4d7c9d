//! Command-line front end for level sweeps.
//!
//! Exit codes: 0 when every level solved, 2 when some level aborted,
//! 1 on configuration or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use harmap::energy::DiscretizationKind;
use harmap::harness::{emit_report, format_table, read_report, report_csv, run_benchmark, RunConfig, RunReport};
use harmap::problems::ProblemId;
use harmap::solvers::{PreconditionerKind, SolverKind, TrustRegionNorm};
use harmap::Error;

#[derive(Parser)]
#[command(name = "harmap", version, about = "Discrete harmonic maps into spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over its level range.
    Run(RunArgs),
    /// Run every configuration listed in a sweep file.
    Sweep(SweepArgs),
    /// Print a report.json as an aligned table.
    Table(TableArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON file with a run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// p1, p2a, p2b, p3k2 .. p3k5, p2a-random
    #[arg(long)]
    problem: Option<ProblemId>,
    /// nc or proj
    #[arg(long)]
    discretization: Option<DiscretizationKind>,
    /// gf or tr
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    min_level: Option<u32>,
    #[arg(long)]
    max_level: Option<u32>,
    #[arg(long)]
    tau_factor: Option<f64>,
    #[arg(long)]
    eps_stop: Option<f64>,
    #[arg(long)]
    project_nodes: bool,
    /// max or euclidean
    #[arg(long, value_parser = parse_serde::<TrustRegionNorm>)]
    tr_norm: Option<TrustRegionNorm>,
    /// multigrid or block-jacobi
    #[arg(long, value_parser = parse_serde::<PreconditionerKind>)]
    preconditioner: Option<PreconditionerKind>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Directory for table.csv, report.json and VTK snapshots.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    emit_vtk: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with `[[run]]` tables, or JSON with a `run` array.
    #[arg(long)]
    config: PathBuf,
    /// Parent directory for runs without their own output directory.
    #[arg(long, default_value = "harmap-out")]
    output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct TableArgs {
    report: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    run: Vec<RunConfig>,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => load::<RunConfig>(path)?,
        None => {
            let missing = |name: &str| Error::Config(format!("--{name} is required without --config"));
            RunConfig::new(
                args.problem.ok_or_else(|| missing("problem"))?,
                args.discretization.ok_or_else(|| missing("discretization"))?,
                args.solver.ok_or_else(|| missing("solver"))?,
            )
        }
    };
    if let Some(v) = args.problem {
        cfg.problem = v;
    }
    if let Some(v) = args.discretization {
        cfg.discretization = v;
    }
    if let Some(v) = args.solver {
        cfg.solver = v;
    }
    if let Some(v) = args.order {
        cfg.order = v;
    }
    if let Some(v) = args.min_level {
        cfg.min_level = v;
    }
    if args.max_level.is_some() {
        cfg.max_level = args.max_level;
    }
    if args.tau_factor.is_some() {
        cfg.tau_factor = args.tau_factor;
    }
    if args.eps_stop.is_some() {
        cfg.eps_stop = args.eps_stop;
    }
    cfg.project_nodes |= args.project_nodes;
    if let Some(v) = args.tr_norm {
        cfg.tr_norm = v;
    }
    if let Some(v) = args.preconditioner {
        cfg.preconditioner = v;
    }
    if args.max_iters.is_some() {
        cfg.max_iters = args.max_iters;
    }
    if args.output_dir.is_some() {
        cfg.output_dir = args.output_dir.clone();
    }
    cfg.emit_vtk |= args.emit_vtk;
    cfg.resolve()?;
    Ok(cfg)
}

fn print_report(report: &RunReport, format: Format) {
    match format {
        Format::Text => print!("{}", format_table(report)),
        Format::Csv => print!("{}", report_csv(report)),
        Format::Json => println!("{}", serde_json::to_string_pretty(report).expect("report serializes")),
    }
}

/// Runs and emits one configuration; `Ok(true)` when some level aborted.
fn execute(cfg: &RunConfig, format: Format) -> Result<bool, Error> {
    let report = run_benchmark(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        emit_report(&report, dir)?;
    }
    print_report(&report, format);
    for row in &report.rows {
        if let Some(reason) = &row.aborted {
            eprintln!("level {} aborted: {reason}", row.r);
        }
    }
    Ok(report.any_aborted())
}

fn sweep(args: &SweepArgs) -> Result<bool, Error> {
    let file: SweepFile = load(&args.config)?;
    let mut runs = file.run;
    for (i, cfg) in runs.iter_mut().enumerate() {
        cfg.resolve().map_err(|e| Error::Config(format!("run {i}: {e}")))?;
        if cfg.output_dir.is_none() {
            let name = format!(
                "{i:02}-{}-{}-{}-p{}",
                cfg.problem, cfg.discretization, cfg.solver, cfg.order
            );
            cfg.output_dir = Some(args.output_dir.join(name));
        }
    }
    let mut partial = false;
    for cfg in &runs {
        partial |= execute(cfg, args.format)?;
    }
    Ok(partial)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run_config(args).and_then(|cfg| execute(&cfg, args.format)),
        Command::Sweep(args) => sweep(args),
        Command::Table(args) => read_report(&args.report).map(|report| {
            print_report(&report, args.format);
            false
        }),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("harmap: {e}");
            ExitCode::from(1)
        }
    }
}

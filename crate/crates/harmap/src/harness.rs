//! Level sweeps over one (problem, discretization, solver, order) combination
//! and their CSV, JSON and text output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::energy::{self, error_norms, DiscretizationKind, Reference, ERROR_EXACTNESS, PROJECTION_ENERGY_EXACTNESS};
use crate::error::{Error, Result};
use crate::mesh::build_uniform_mesh;
use crate::problems::ProblemId;
use crate::solvers::{
    gradient_flow_solve, trust_region_solve, GradientFlowConfig, PreconditionerKind, SolveTrace, SolverKind,
    TrustRegionConfig, TrustRegionNorm,
};
use crate::space::{interpolate, lagrange_space, CoefficientField};
use crate::vtk;

pub const CSV_HEADER: &str = "r,elements,E0,E,errL2,errH1,eocL2,eocH1,iters,delta1,seconds";

/// One sweep. Unset optional values take the problem defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub problem: ProblemId,
    pub discretization: DiscretizationKind,
    pub solver: SolverKind,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_min_level")]
    pub min_level: u32,
    #[serde(default)]
    pub max_level: Option<u32>,
    #[serde(default)]
    pub tau_factor: Option<f64>,
    #[serde(default)]
    pub eps_stop: Option<f64>,
    #[serde(default)]
    pub project_nodes: bool,
    #[serde(default)]
    pub tr_norm: TrustRegionNorm,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_vtk: bool,
}

fn default_order() -> usize {
    1
}

fn default_min_level() -> u32 {
    1
}

impl RunConfig {
    pub fn new(problem: ProblemId, discretization: DiscretizationKind, solver: SolverKind) -> Self {
        RunConfig {
            problem,
            discretization,
            solver,
            order: 1,
            min_level: 1,
            max_level: None,
            tau_factor: None,
            eps_stop: None,
            project_nodes: false,
            tr_norm: TrustRegionNorm::default(),
            preconditioner: PreconditionerKind::default(),
            max_iters: None,
            output_dir: None,
            emit_vtk: false,
        }
    }

    pub fn levels(mut self, min: u32, max: u32) -> Self {
        self.min_level = min;
        self.max_level = Some(max);
        self
    }

    pub fn order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    /// Checks the combination and fills every default in.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.solver == SolverKind::GradientFlow && self.discretization == DiscretizationKind::Projection {
            return Err(Error::Config(
                "the gradient flow exists only for the nonconforming discretization".into(),
            ));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::Order(self.order));
        }
        let max_level = self.max_level.unwrap_or(self.problem.max_level());
        if self.min_level < 1 || self.min_level > max_level {
            return Err(Error::Config(format!(
                "empty level range {}..={max_level}",
                self.min_level
            )));
        }
        let eps_stop = self.eps_stop.unwrap_or(self.problem.default_eps_stop());
        let tau_factor = self.tau_factor.unwrap_or(self.problem.default_tau_factor());
        let mut gradient_flow = GradientFlowConfig {
            eps_stop,
            project_nodes: self.project_nodes,
            preconditioner: self.preconditioner,
            ..Default::default()
        };
        let mut trust_region = TrustRegionConfig {
            eps_stop,
            norm: self.tr_norm,
            preconditioner: self.preconditioner,
            ..Default::default()
        };
        if let Some(n) = self.max_iters {
            gradient_flow.max_iters = n;
            trust_region.max_iters = n;
        }
        gradient_flow.validate()?;
        trust_region.validate()?;
        Ok(ResolvedConfig {
            problem: self.problem,
            discretization: self.discretization,
            solver: self.solver,
            order: self.order,
            min_level: self.min_level,
            max_level,
            tau_factor,
            gradient_flow,
            trust_region,
            energy_quadrature_exactness: PROJECTION_ENERGY_EXACTNESS,
            error_quadrature_exactness: ERROR_EXACTNESS,
            emit_vtk: self.emit_vtk,
            output_dir: self.output_dir.clone(),
        })
    }
}

/// Every effective parameter of a sweep. `gradient_flow.tau` is per level
/// `tau_factor * h` and is stored as the factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub problem: ProblemId,
    pub discretization: DiscretizationKind,
    pub solver: SolverKind,
    pub order: usize,
    pub min_level: u32,
    pub max_level: u32,
    pub tau_factor: f64,
    pub gradient_flow: GradientFlowConfig,
    pub trust_region: TrustRegionConfig,
    pub energy_quadrature_exactness: usize,
    pub error_quadrature_exactness: usize,
    pub emit_vtk: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub r: u32,
    pub elements: usize,
    pub nodes: usize,
    pub mesh_size: f64,
    pub e0: Option<f64>,
    pub e: Option<f64>,
    /// Against the exact solution, or against the previous level.
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub eoc_l2: Option<f64>,
    pub eoc_h1: Option<f64>,
    pub iters: Option<usize>,
    pub converged: bool,
    pub delta1: Option<f64>,
    /// `max_k int I_h ||u^k|^2 - 1|` over the iterates.
    pub constraint_max: Option<f64>,
    /// `tau E[u^0]` for gradient-flow rows.
    pub constraint_bound: Option<f64>,
    /// Energies never increased along accepted steps.
    pub energy_monotone: Option<bool>,
    pub seconds: f64,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ResolvedConfig,
    pub version: String,
    pub exact_reference: bool,
    pub rows: Vec<LevelRow>,
}

impl RunReport {
    pub fn any_aborted(&self) -> bool {
        self.rows.iter().any(|r| r.aborted.is_some())
    }

    pub fn row(&self, r: u32) -> Option<&LevelRow> {
        self.rows.iter().find(|row| row.r == r)
    }
}

/// Initial iterate and solver trace for one level; the result is `trace.field`.
pub fn solve_level(cfg: &ResolvedConfig, level: u32) -> Result<(CoefficientField, SolveTrace)> {
    let p = cfg.problem;
    let mesh = Arc::new(build_uniform_mesh(p.dim(), level)?);
    let space = lagrange_space(mesh.clone(), cfg.order)?;
    let u0 = interpolate(&space, p.target_dim(), |x| p.initial(x))?;
    let trace = match cfg.solver {
        SolverKind::GradientFlow => {
            let gf = GradientFlowConfig {
                tau: cfg.tau_factor * mesh.mesh_size(),
                ..cfg.gradient_flow
            };
            gradient_flow_solve(&u0, &gf)?
        }
        SolverKind::TrustRegion => trust_region_solve(&u0, cfg.discretization, &cfg.trust_region)?,
    };
    Ok((u0, trace))
}

fn exact_errors(cfg: &ResolvedConfig, u: &CoefficientField) -> Result<(f64, f64)> {
    let p = cfg.problem;
    let exact = move |x: &crate::la::Vec3| p.exact_solution(x).expect("exact solution exists");
    error_norms(
        u,
        cfg.discretization,
        Reference::Map {
            map: &exact,
            singular: p.finite_energy_singularity(),
        },
    )
}

pub fn run_benchmark(cfg: &RunConfig) -> Result<RunReport> {
    let cfg = cfg.resolve()?;
    let p = cfg.problem;
    let kind = cfg.discretization;
    if cfg.emit_vtk {
        if let Some(dir) = &cfg.output_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let exact = p.has_exact_solution();
    let mut rows: Vec<LevelRow> = Vec::new();
    let mut previous: Option<CoefficientField> = None;
    for level in cfg.min_level..=cfg.max_level {
        let mesh = build_uniform_mesh(p.dim(), level)?;
        let h = mesh.mesh_size();
        let mut row = LevelRow {
            r: level,
            elements: mesh.num_elements(),
            nodes: 0,
            mesh_size: h,
            e0: None,
            e: None,
            err_l2: None,
            err_h1: None,
            eoc_l2: None,
            eoc_h1: None,
            iters: None,
            converged: false,
            delta1: None,
            constraint_max: None,
            constraint_bound: None,
            energy_monotone: None,
            seconds: 0.0,
            aborted: None,
        };
        let start = Instant::now();
        let outcome = solve_level(&cfg, level).and_then(|(u0, trace)| {
            let errors = if exact {
                Some(exact_errors(&cfg, &trace.field)?)
            } else if let Some(prev) = &previous {
                Some(error_norms(&trace.field, kind, Reference::Field(prev, kind))?)
            } else {
                None
            };
            Ok((u0, trace, errors))
        });
        row.seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok((u0, trace, errors)) => {
                row.nodes = u0.values().len();
                row.e0 = energy::dirichlet_energy(&u0, kind).ok();
                row.e = Some(trace.final_energy());
                row.iters = Some(trace.iterations());
                row.converged = trace.converged;
                let cv = energy::constraint_violation(&trace.field);
                row.delta1 = Some(cv.delta1);
                row.constraint_max = Some(trace.max_constraint());
                let mut monotone = true;
                let mut last = trace.initial_energy;
                for r in trace.records.iter().filter(|r| r.accepted) {
                    monotone &= r.energy <= last;
                    last = r.energy;
                }
                row.energy_monotone = Some(monotone);
                if cfg.solver == SolverKind::GradientFlow {
                    row.constraint_bound = Some(cfg.tau_factor * h * trace.initial_energy);
                }
                if let Some((l2, h1)) = errors {
                    row.err_l2 = Some(l2);
                    row.err_h1 = Some(h1);
                    if let Some(prev_row) = rows.last() {
                        if prev_row.r + 1 == level {
                            let eoc = |a: Option<f64>, b: f64| a.filter(|a| *a > 0.0 && b > 0.0).map(|a| (a / b).log2());
                            row.eoc_l2 = eoc(prev_row.err_l2, l2);
                            row.eoc_h1 = eoc(prev_row.err_h1, h1);
                        }
                    }
                }
                if cfg.emit_vtk {
                    if let Some(dir) = &cfg.output_dir {
                        vtk::write_field_vtk(&trace.field, "u", &dir.join(format!("level_r{level}.vtk")))?;
                    }
                }
                previous = Some(trace.field);
            }
            Err(e) => {
                row.aborted = Some(e.to_string());
                previous = None;
            }
        }
        rows.push(row);
    }
    Ok(RunReport {
        config: cfg,
        version: env!("CARGO_PKG_VERSION").to_string(),
        exact_reference: exact,
        rows,
    })
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => String::new(),
    }
}

pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.r,
            r.elements,
            num(r.e0),
            num(r.e),
            num(r.err_l2),
            num(r.err_h1),
            num(r.eoc_l2),
            num(r.eoc_h1),
            r.iters.map(|i| i.to_string()).unwrap_or_default(),
            num(r.delta1),
            num(Some(r.seconds)),
        );
    }
    out
}

/// Writes `table.csv` and `report.json` into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("table.csv");
    fs::write(&csv, report_csv(report)).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Aligned text table in the layout of the published tables.
pub fn format_table(report: &RunReport) -> String {
    let c = &report.config;
    let mut out = format!(
        "{} {} {} p={} ({})\n",
        c.problem,
        c.discretization,
        c.solver,
        c.order,
        if report.exact_reference { "errors vs exact solution" } else { "errors vs previous level" }
    );
    let _ = writeln!(
        out,
        "{:>2} {:>9} {:>10} {:>10} {:>8} {:>8} {:>6} {:>12} {:>9}",
        "r", "|T_h|", "E[u0]", "E[u]", "EOC_L2", "EOC_H1", "#Iter", "delta1", "seconds"
    );
    let f = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        if let Some(msg) = &r.aborted {
            let _ = writeln!(out, "{:>2} {:>9} aborted: {msg}", r.r, r.elements);
            continue;
        }
        let _ = writeln!(
            out,
            "{:>2} {:>9} {:>10} {:>10} {:>8} {:>8} {:>6} {:>12} {:>9.2}",
            r.r,
            r.elements,
            f(r.e0, 5),
            f(r.e, 5),
            f(r.eoc_l2, 3),
            f(r.eoc_h1, 3),
            r.iters.map(|i| i.to_string()).unwrap_or_default(),
            r.delta1.map(|d| format!("{d:.4e}")).unwrap_or_default(),
            r.seconds
        );
    }
    out
}

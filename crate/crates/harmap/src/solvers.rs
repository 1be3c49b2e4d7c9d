//! Tangential discrete gradient flow and the Riemannian trust-region method.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::energy::{
    self, constraint_violation, dirichlet_energy, energy_derivatives, riemannian_gradient_in,
    riemannian_hessian_matrix, star_inner_product, DiscretizationKind,
};
use crate::error::{Error, Result};
use crate::la::{self, pcg, BlockCsr, BlockJacobi, LinearOperator, Vec3};
use crate::multigrid::{Multigrid, TangentPreconditioner};
use crate::space::{CoefficientField, LagrangeSpace};
use crate::sphere;
use crate::tangent::{TangentField, TangentFrames};

const INITIAL_UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[serde(alias = "gf")]
    GradientFlow,
    #[serde(alias = "tr")]
    TrustRegion,
}

impl SolverKind {
    pub fn short_name(self) -> &'static str {
        match self {
            SolverKind::GradientFlow => "gf",
            SolverKind::TrustRegion => "tr",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gf" | "gradientflow" | "gradient-flow" => Ok(SolverKind::GradientFlow),
            "tr" | "trustregion" | "trust-region" => Ok(SolverKind::TrustRegion),
            _ => Err(Error::Config(format!("unknown solver `{s}`"))),
        }
    }
}

/// Preconditioner for the tangent-space linear systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    /// Scalar geometric multigrid sandwiched between the nodal frames.
    #[default]
    Multigrid,
    /// Inverse diagonal blocks of the reduced matrix.
    BlockJacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientFlowConfig {
    pub tau: f64,
    pub eps_stop: f64,
    pub project_nodes: bool,
    pub max_iters: usize,
    pub linear_tol: f64,
    pub preconditioner: PreconditionerKind,
}

impl Default for GradientFlowConfig {
    fn default() -> Self {
        GradientFlowConfig {
            tau: 0.1,
            eps_stop: 1e-3,
            project_nodes: false,
            max_iters: 100_000,
            linear_tol: 1e-10,
            preconditioner: PreconditionerKind::Multigrid,
        }
    }
}

impl GradientFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.eps_stop > 0.0) || !(self.linear_tol > 0.0) {
            return Err(Error::Config(
                "gradient flow needs tau, eps_stop and linear_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Norm bounding the trust region in tangent coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrustRegionNorm {
    /// Largest tangent coordinate (a box).
    #[default]
    Max,
    /// Euclidean norm of the stacked tangent coordinates.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionConfig {
    pub delta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stop: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub max_inner_iters: usize,
    pub norm: TrustRegionNorm,
    pub preconditioner: PreconditionerKind,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            delta0: 0.5,
            beta1: 0.9,
            beta2: 1e-2,
            eps_stop: 1e-3,
            inner_tol: 1e-10,
            max_iters: 1000,
            max_inner_iters: 2000,
            norm: TrustRegionNorm::Max,
            preconditioner: PreconditionerKind::Multigrid,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > self.beta2 && self.beta2 > 0.0) {
            return Err(Error::Config("trust region needs beta1 > beta2 > 0".into()));
        }
        if !(self.delta0 > 0.0) || !(self.eps_stop > 0.0) {
            return Err(Error::Config("trust region needs delta0, eps_stop > 0".into()));
        }
        Ok(())
    }
}

/// One solver iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Energy of the iterate after this iteration.
    pub energy: f64,
    /// `(c, c)_*^{1/2}` of the update direction (`d_t u` or `phi`).
    pub correction_norm: f64,
    pub delta1: f64,
    /// `int I_h ||u|^2 - 1|`.
    pub constraint: f64,
    pub rho: Option<f64>,
    pub radius: Option<f64>,
    pub accepted: bool,
    pub inner_iterations: usize,
}

pub const TRACE_CSV_HEADER: &str = "iteration,energy,norm,delta1,constraint,rho,radius,accepted,inner";

impl IterationRecord {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{:e},{:e},{:e},{:e},{},{},{},{}",
            self.iteration,
            self.energy,
            self.correction_norm,
            self.delta1,
            self.constraint,
            opt(self.rho),
            opt(self.radius),
            self.accepted,
            self.inner_iterations
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub initial_energy: f64,
    pub records: Vec<IterationRecord>,
    pub field: CoefficientField,
    pub converged: bool,
    pub seconds: f64,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_energy(&self) -> f64 {
        self.records.last().map_or(self.initial_energy, |r| r.energy)
    }

    /// Largest `int I_h ||u^k|^2 - 1|` over all iterates.
    pub fn max_constraint(&self) -> f64 {
        self.records.iter().fold(0.0, |a, r| a.max(r.constraint))
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_line())?;
        }
        Ok(())
    }
}

/// Streams records as they are produced.
pub trait TraceObserver {
    fn record(&mut self, record: &IterationRecord);

    /// Called with every new iterate, before its record.
    fn iterate(&mut self, _field: &CoefficientField) {}
}

impl<F: FnMut(&IterationRecord)> TraceObserver for F {
    fn record(&mut self, record: &IterationRecord) {
        self(record)
    }
}

/// Writes one CSV line per iteration.
pub struct CsvTraceWriter<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Self {
        CsvTraceWriter {
            out,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceObserver for CsvTraceWriter<W> {
    fn record(&mut self, record: &IterationRecord) {
        if !self.header_written {
            let _ = writeln!(self.out, "{TRACE_CSV_HEADER}");
            self.header_written = true;
        }
        let _ = writeln!(self.out, "{}", record.csv_line());
    }
}

struct NoObserver;

impl TraceObserver for NoObserver {
    fn record(&mut self, _: &IterationRecord) {}
}

/// `K (x) I_m` as an `m x m` block matrix.
fn vector_stiffness(space: &LagrangeSpace, m: usize) -> BlockCsr {
    let k = space.stiffness();
    let mut out = BlockCsr::zeros(k.pattern().clone(), m);
    for (pos, v) in k.values().iter().enumerate() {
        let blk = out.block_mut(pos);
        for d in 0..m {
            blk[d * m + d] = *v;
        }
    }
    out
}

fn check_initial(field: &CoefficientField) -> Result<()> {
    for (i, v) in field.values().iter().enumerate() {
        let n = la::norm(v);
        if (n - 1.0).abs() > INITIAL_UNIT_TOL {
            return Err(Error::NonUnitNode { node: i, norm: n });
        }
    }
    Ok(())
}

enum Precond<'a> {
    Multigrid(TangentPreconditioner<'a>),
    Jacobi(BlockJacobi),
}

impl LinearOperator for Precond<'_> {
    fn dim(&self) -> usize {
        match self {
            Precond::Multigrid(p) => p.dim(),
            Precond::Jacobi(p) => p.dim(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Precond::Multigrid(p) => p.apply(x, y),
            Precond::Jacobi(p) => p.apply(x, y),
        }
    }
}

fn preconditioner<'a>(
    kind: PreconditionerKind,
    multigrid: Option<&'a Multigrid>,
    frames: &'a TangentFrames,
    fixed: &'a [bool],
    scale: f64,
    matrix: &BlockCsr,
) -> Precond<'a> {
    match (kind, multigrid) {
        (PreconditionerKind::Multigrid, Some(mg)) => Precond::Multigrid(TangentPreconditioner {
            multigrid: mg,
            frames,
            fixed,
            scale,
        }),
        _ => Precond::Jacobi(BlockJacobi::new(matrix)),
    }
}

/// Reusable state of the gradient flow on one space.
struct GradientFlow {
    cfg: GradientFlowConfig,
    stiffness: BlockCsr,
    multigrid: Option<Multigrid>,
}

/// Result of one gradient-flow step.
#[derive(Debug, Clone)]
pub struct GradientFlowStep {
    pub field: CoefficientField,
    /// `d_t u` in ambient coordinates.
    pub velocity: Vec<Vec3>,
    /// `(d_t u, d_t u)_*^{1/2}`.
    pub norm: f64,
    pub linear_iterations: usize,
}

impl GradientFlow {
    fn new(space: &Arc<LagrangeSpace>, m: usize, cfg: GradientFlowConfig) -> Result<Self> {
        cfg.validate()?;
        let multigrid = match cfg.preconditioner {
            PreconditionerKind::Multigrid => Some(Multigrid::new(space)?),
            PreconditionerKind::BlockJacobi => None,
        };
        Ok(GradientFlow {
            cfg,
            stiffness: vector_stiffness(space, m),
            multigrid,
        })
    }

    /// `guess` is an ambient velocity used as the starting point of the solve.
    fn step(&self, u: &CoefficientField, guess: Option<&[Vec3]>) -> Result<GradientFlowStep> {
        let space = u.space();
        let fixed = space.boundary_flags();
        let tau = self.cfg.tau;
        let frames = TangentFrames::new(u);
        let a = frames.reduce_operator(&self.stiffness, 1.0 + tau, None, fixed);
        let ku = energy::stiffness_apply(u, u.values());
        let mut rhs = frames.to_tangent(&ku);
        rhs.zero_fixed(fixed);
        for v in rhs.values_mut() {
            *v = -*v;
        }
        let pre = preconditioner(self.cfg.preconditioner, self.multigrid.as_ref(), &frames, fixed, 1.0 + tau, &a);
        let mut c = match guess {
            Some(g) => {
                let mut t = frames.to_tangent(g);
                t.zero_fixed(fixed);
                t.into_values()
            }
            None => vec![0.0; rhs.values().len()],
        };
        let stats = pcg(&a, &pre, rhs.values(), &mut c, self.cfg.linear_tol, 10_000)?;
        let mut c = TangentField::from_values(u.m(), c);
        c.zero_fixed(fixed);
        let velocity = frames.to_ambient(&c);
        let norm = star_inner_product(u, &velocity, &velocity).max(0.0).sqrt();
        let mut values = u.values().to_vec();
        for (i, (v, d)) in values.iter_mut().zip(&velocity).enumerate() {
            if fixed[i] {
                continue;
            }
            la::axpy(v, tau, d);
            if self.cfg.project_nodes {
                let n = la::norm(v);
                if n == 0.0 {
                    return Err(Error::ZeroNode(i));
                }
                *v = la::scale(1.0 / n, v);
            }
        }
        Ok(GradientFlowStep {
            field: CoefficientField::new(space.clone(), u.m(), values)?,
            velocity,
            norm,
            linear_iterations: stats.iterations,
        })
    }
}

/// One implicit tangential step `(1 + tau) (d, v)_* = -(u, v)_*` for all
/// tangent `v` vanishing on the boundary, followed by `u + tau d`.
pub fn gradient_flow_step(u: &CoefficientField, cfg: &GradientFlowConfig) -> Result<GradientFlowStep> {
    GradientFlow::new(u.space(), u.m(), *cfg)?.step(u, None)
}

pub fn gradient_flow_solve(initial: &CoefficientField, cfg: &GradientFlowConfig) -> Result<SolveTrace> {
    gradient_flow_solve_observed(initial, cfg, &mut NoObserver)
}

pub fn gradient_flow_solve_observed(
    initial: &CoefficientField,
    cfg: &GradientFlowConfig,
    observer: &mut dyn TraceObserver,
) -> Result<SolveTrace> {
    let start = Instant::now();
    check_initial(initial)?;
    let flow = GradientFlow::new(initial.space(), initial.m(), *cfg)?;
    let kind = DiscretizationKind::Nonconforming;
    let initial_energy = dirichlet_energy(initial, kind)?;
    let mut u = initial.clone();
    let mut records = Vec::new();
    let mut converged = false;
    let mut velocity: Option<Vec<Vec3>> = None;
    for it in 1..=cfg.max_iters {
        let step = flow.step(&u, velocity.as_deref())?;
        u = step.field;
        velocity = Some(step.velocity);
        observer.iterate(&u);
        let cv = constraint_violation(&u);
        let rec = IterationRecord {
            iteration: it,
            energy: dirichlet_energy(&u, kind)?,
            correction_norm: step.norm,
            delta1: cv.delta1,
            constraint: cv.squared,
            rho: None,
            radius: None,
            accepted: true,
            inner_iterations: step.linear_iterations,
        };
        observer.record(&rec);
        records.push(rec);
        if step.norm * step.norm <= cfg.eps_stop * cfg.eps_stop {
            converged = true;
            break;
        }
    }
    Ok(SolveTrace {
        initial_energy,
        records,
        field: u,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `(E_old - E_new) / (m_old - m_new)`.
pub fn rho_ratio(e_old: f64, e_new: f64, m_old: f64, m_new: f64) -> Result<f64> {
    let pred = m_old - m_new;
    if !(pred > 0.0) {
        return Err(Error::DegenerateModel(pred));
    }
    Ok((e_old - e_new) / pred)
}

/// Approximate minimizer of the quadratic model and its predicted decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub correction: Vec<f64>,
    pub predicted_decrease: f64,
    pub iterations: usize,
    pub hit_boundary: bool,
}

fn region_norm(norm: TrustRegionNorm, x: &[f64]) -> f64 {
    match norm {
        TrustRegionNorm::Euclidean => la::norm_slice(x),
        TrustRegionNorm::Max => x.iter().fold(0.0, |a, v| a.max(v.abs())),
    }
}

/// Largest `t >= 0` with `|x + t p| <= delta`.
fn step_to_boundary(norm: TrustRegionNorm, x: &[f64], p: &[f64], delta: f64) -> f64 {
    match norm {
        TrustRegionNorm::Euclidean => {
            let pp = la::dot_slices(p, p);
            let xp = la::dot_slices(x, p);
            let xx = la::dot_slices(x, x);
            let disc = (xp * xp + pp * (delta * delta - xx)).max(0.0);
            (-xp + disc.sqrt()) / pp
        }
        TrustRegionNorm::Max => x
            .iter()
            .zip(p)
            .filter(|(_, pi)| **pi != 0.0)
            .map(|(xi, pi)| ((delta * pi.signum() - xi) / pi).max(0.0))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Steihaug-Toint truncated preconditioned conjugate gradients for
/// `min g.x + x.Hx/2` subject to `|x| <= delta`.
pub fn tr_subproblem(
    grad: &[f64],
    hess: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    delta: f64,
    norm: TrustRegionNorm,
    rtol: f64,
    max_iters: usize,
) -> SubproblemSolution {
    let n = grad.len();
    let mut x = vec![0.0; n];
    let gnorm = la::norm_slice(grad);
    let model = |x: &[f64]| -> f64 {
        let mut hx = vec![0.0; n];
        hess.apply(x, &mut hx);
        -(la::dot_slices(grad, x) + 0.5 * la::dot_slices(x, &hx))
    };
    if gnorm == 0.0 {
        return SubproblemSolution {
            correction: x,
            predicted_decrease: 0.0,
            iterations: 0,
            hit_boundary: false,
        };
    }
    let mut r = grad.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut rz = la::dot_slices(&r, &z);
    let mut hp = vec![0.0; n];
    let mut hit_boundary = false;
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        hess.apply(&p, &mut hp);
        let curv = la::dot_slices(&p, &hp);
        let alpha = rz / curv;
        let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
        if curv <= 0.0 || region_norm(norm, &trial) >= delta {
            let t = step_to_boundary(norm, &x, &p, delta);
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += t * pi;
            }
            hit_boundary = true;
            break;
        }
        x = trial;
        for (ri, hi) in r.iter_mut().zip(&hp) {
            *ri += alpha * hi;
        }
        if la::norm_slice(&r) <= rtol * gnorm {
            break;
        }
        precond.apply(&r, &mut z);
        let rz_new = la::dot_slices(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = -zi + beta * *pi;
        }
    }
    let predicted_decrease = model(&x);
    SubproblemSolution {
        correction: x,
        predicted_decrease,
        iterations,
        hit_boundary,
    }
}

/// Nodewise `exp_{u_i}(w_i)` on free nodes with nonzero correction.
fn retract(u: &CoefficientField, w: &[Vec3]) -> Result<CoefficientField> {
    let fixed = u.space().boundary_flags();
    let mut values = u.values().to_vec();
    for (i, (v, wi)) in values.iter_mut().zip(w).enumerate() {
        if fixed[i] || *wi == [0.0; 3] {
            continue;
        }
        let y = sphere::exp_map(v, wi);
        *v = la::scale(1.0 / la::norm(&y), &y);
    }
    CoefficientField::new(u.space().clone(), u.m(), values)
}

pub fn trust_region_solve(
    initial: &CoefficientField,
    kind: DiscretizationKind,
    cfg: &TrustRegionConfig,
) -> Result<SolveTrace> {
    trust_region_solve_observed(initial, kind, cfg, &mut NoObserver)
}

pub fn trust_region_solve_observed(
    initial: &CoefficientField,
    kind: DiscretizationKind,
    cfg: &TrustRegionConfig,
    observer: &mut dyn TraceObserver,
) -> Result<SolveTrace> {
    let start = Instant::now();
    cfg.validate()?;
    check_initial(initial)?;
    let space = initial.space();
    let fixed = space.boundary_flags();
    let multigrid = match cfg.preconditioner {
        PreconditionerKind::Multigrid => Some(Multigrid::new(space)?),
        PreconditionerKind::BlockJacobi => None,
    };
    let mut u = initial.clone();
    let initial_energy = dirichlet_energy(&u, kind)?;
    let mut delta = cfg.delta0;
    let mut records = Vec::new();
    let mut converged = false;
    let mut egh = energy_derivatives(&u, kind)?;
    for it in 1..=cfg.max_iters {
        let frames = TangentFrames::new(&u);
        let grad = riemannian_gradient_in(&frames, &u, &egh.gradient);
        let hess = riemannian_hessian_matrix(&u, &egh, &frames);
        let pre = preconditioner(cfg.preconditioner, multigrid.as_ref(), &frames, fixed, 1.0, &hess);
        let sub = tr_subproblem(
            grad.values(),
            &hess,
            &pre,
            delta,
            cfg.norm,
            cfg.inner_tol,
            cfg.max_inner_iters,
        );
        let mut phi = TangentField::from_values(u.m(), sub.correction);
        phi.zero_fixed(fixed);
        let amb = frames.to_ambient(&phi);
        let norm = star_inner_product(&u, &amb, &amb).max(0.0).sqrt();
        let mut rec = IterationRecord {
            iteration: it,
            energy: egh.energy,
            correction_norm: norm,
            delta1: 0.0,
            constraint: 0.0,
            rho: None,
            radius: Some(delta),
            accepted: false,
            inner_iterations: sub.iterations,
        };
        if norm * norm < cfg.eps_stop * cfg.eps_stop {
            observer.record(&rec);
            records.push(rec);
            converged = true;
            break;
        }
        let candidate = retract(&u, &amb)?;
        let e_new = dirichlet_energy(&candidate, kind);
        let rho = match e_new {
            Ok(e) => rho_ratio(egh.energy, e, 0.0, -sub.predicted_decrease).unwrap_or(f64::NEG_INFINITY),
            Err(Error::SingularProjection { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        rec.rho = Some(rho);
        if rho > cfg.beta2 {
            u = candidate;
            observer.iterate(&u);
            egh = energy_derivatives(&u, kind)?;
            rec.energy = egh.energy;
            rec.accepted = true;
            if rho > cfg.beta1 {
                delta *= 2.0;
            }
        } else {
            delta *= 0.5;
        }
        let cv = constraint_violation(&u);
        rec.delta1 = cv.delta1;
        rec.constraint = cv.squared;
        observer.record(&rec);
        records.push(rec);
    }
    Ok(SolveTrace {
        initial_energy,
        records,
        field: u,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

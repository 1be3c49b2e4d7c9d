//! Property checks shared by the proptest suite and the acceptance run.

#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use harmap::energy::{
    dirichlet_energy, energy_and_gradient, energy_derivatives, riemannian_gradient, riemannian_hessian_apply,
    DiscretizationKind,
};
use harmap::la::{self, Vec3};
use harmap::mesh::build_uniform_mesh;
use harmap::quadrature::{graded_rule, quadrature_rule, MAX_EXACTNESS};
use harmap::solvers::{
    gradient_flow_solve_observed, trust_region_solve_observed, GradientFlowConfig, IterationRecord, TraceObserver,
    TrustRegionConfig, TrustRegionNorm,
};
use harmap::space::{interpolate, lagrange_space, CoefficientField, LagrangeSpace};
use harmap::sphere::{exp_map, sphere_exp, TangentVector, UnitVector};
use harmap::tangent::{TangentField, TangentFrames};

/// Longest perturbation list any case needs (second order on the 3D level-1 mesh).
pub const MAX_NODES: usize = 125;

pub fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-range..range)
}

pub fn perturbations() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(1.0), MAX_NODES)
}

pub fn kind() -> impl Strategy<Value = DiscretizationKind> {
    prop_oneof![Just(DiscretizationKind::Nonconforming), Just(DiscretizationKind::Projection)]
}

/// Mesh and element order for a small field.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub dim: usize,
    pub level: u32,
    pub order: usize,
    pub m: usize,
}

pub fn small_shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        Just(Shape { dim: 2, level: 1, order: 1, m: 3 }),
        Just(Shape { dim: 2, level: 2, order: 1, m: 3 }),
        Just(Shape { dim: 2, level: 2, order: 1, m: 2 }),
        Just(Shape { dim: 2, level: 1, order: 2, m: 3 }),
        Just(Shape { dim: 2, level: 2, order: 2, m: 2 }),
        Just(Shape { dim: 3, level: 1, order: 1, m: 3 }),
        Just(Shape { dim: 3, level: 1, order: 2, m: 3 }),
    ]
}

pub fn space(shape: Shape) -> Arc<LagrangeSpace> {
    lagrange_space(Arc::new(build_uniform_mesh(shape.dim, shape.level).unwrap()), shape.order).unwrap()
}

fn normalized(v: Vec3) -> Vec3 {
    la::scale(1.0 / la::norm(&v), &v)
}

/// Smooth unit field with interior nodes tilted by `amp * p_i`.
pub fn perturbed_field(shape: Shape, p: &[Vec3], amp: f64) -> CoefficientField {
    let s = space(shape);
    let m = shape.m;
    let base = move |x: &Vec3| -> Vec3 {
        let mut v = [x[0] + 0.3, x[1] - 0.2, x[2] + 1.1];
        v[m..].fill(0.0);
        if m == 2 {
            v[1] += 1.1;
        }
        normalized(v)
    };
    let mut f = interpolate(&s, m, |x| Ok(base(x))).unwrap();
    for (i, v) in f.values_mut().iter_mut().enumerate() {
        if !s.is_boundary(i) {
            let mut d = la::scale(amp, &p[i % p.len()]);
            d[m..].fill(0.0);
            *v = normalized(la::add(v, &d));
        }
    }
    f
}

fn shifted(f: &CoefficientField, dir: &[Vec3], t: f64) -> CoefficientField {
    let vals = f.values().iter().zip(dir).map(|(v, d)| la::add(v, &la::scale(t, d))).collect();
    CoefficientField::new(f.space().clone(), f.m(), vals).unwrap()
}

fn ambient_direction(f: &CoefficientField, p: &[Vec3]) -> Vec<Vec3> {
    (0..f.values().len())
        .map(|i| {
            let mut d = p[(7 * i + 3) % p.len()];
            d[f.m()..].fill(0.0);
            d
        })
        .collect()
}

fn norm_all(v: &[Vec3]) -> f64 {
    v.iter().map(|x| la::dot(x, x)).sum::<f64>().sqrt()
}

/// Gradient against central differences of the energy (relative 1e-5) and
/// Hessian against central differences of the gradient (relative 1e-4).
pub fn check_euclidean_derivatives(
    shape: Shape,
    kind: DiscretizationKind,
    p: &[Vec3],
    amp: f64,
) -> Result<(), TestCaseError> {
    let f = perturbed_field(shape, p, amp);
    let egh = energy_derivatives(&f, kind).map_err(|e| TestCaseError::reject(e.to_string()))?;
    let dir = ambient_direction(&f, p);
    let h = 1e-6;
    let (ep, _) = energy_and_gradient(&shifted(&f, &dir, h), kind).unwrap();
    let (em, _) = energy_and_gradient(&shifted(&f, &dir, -h), kind).unwrap();
    let fd = (ep - em) / (2.0 * h);
    let an: f64 = egh.gradient.iter().zip(&dir).map(|(g, d)| la::dot(g, d)).sum();
    let scale = an.abs().max(norm_all(&egh.gradient) * norm_all(&dir));
    prop_assert!((fd - an).abs() <= 1e-5 * scale, "gradient {fd} vs {an}");

    let h = 1e-5;
    let (_, gp) = energy_and_gradient(&shifted(&f, &dir, h), kind).unwrap();
    let (_, gm) = energy_and_gradient(&shifted(&f, &dir, -h), kind).unwrap();
    let hd = egh.hessian_apply(f.m(), &dir);
    let diff: Vec<Vec3> = gp
        .iter()
        .zip(&gm)
        .zip(&hd)
        .map(|((a, b), c)| la::sub(&la::scale(0.5 / h, &la::sub(a, b)), c))
        .collect();
    prop_assert!(norm_all(&diff) <= 1e-4 * norm_all(&hd).max(1e-8), "hessian defect {}", norm_all(&diff));
    Ok(())
}

/// Riemannian gradient and Hessian against `t -> E(exp_u(t w))`.
pub fn check_riemannian_derivatives(
    shape: Shape,
    kind: DiscretizationKind,
    p: &[Vec3],
    amp: f64,
) -> Result<(), TestCaseError> {
    let f = perturbed_field(shape, p, amp);
    let egh = energy_derivatives(&f, kind).map_err(|e| TestCaseError::reject(e.to_string()))?;
    let frames = TangentFrames::new(&f);
    let k = frames.rank();
    let mut w = TangentField::from_values(
        f.m(),
        (0..f.values().len() * k).map(|i| p[(5 * i + 1) % p.len()][i % 3]).collect(),
    );
    w.zero_fixed(f.space().boundary_flags());
    let amb = frames.to_ambient(&w);
    let along = |t: f64| {
        let vals = f
            .values()
            .iter()
            .zip(&amb)
            .map(|(u, v)| {
                let y = exp_map(u, &la::scale(t, v));
                normalized(y)
            })
            .collect();
        let g = CoefficientField::new(f.space().clone(), f.m(), vals).unwrap();
        dirichlet_energy(&g, kind).unwrap()
    };
    let grad = riemannian_gradient(&f, &egh).unwrap();
    let an1 = grad.dot(&w);
    let h = 1e-6;
    let fd1 = (along(h) - along(-h)) / (2.0 * h);
    let scale = an1.abs().max(grad.norm() * w.norm());
    prop_assert!((fd1 - an1).abs() <= 1e-5 * scale, "riemannian gradient {fd1} vs {an1}");

    let hw = riemannian_hessian_apply(&f, &egh, &w).unwrap();
    let an2 = w.dot(&hw);
    let h = 1e-3;
    let fd2 = (along(h) - 2.0 * along(0.0) + along(-h)) / (h * h);
    let scale = an2.abs().max(hw.norm() * w.norm());
    prop_assert!((fd2 - an2).abs() <= 1e-4 * scale, "riemannian hessian {fd2} vs {an2}");
    Ok(())
}

/// `|exp_x(v)| = 1` for the raw formula and the normalized map.
pub fn check_sphere_exp(m: usize, x: Vec3, v: Vec3, length: f64) -> Result<(), TestCaseError> {
    let mut x = x;
    x[m..].fill(0.0);
    prop_assume!(la::norm(&x) > 1e-3);
    let x = normalized(x);
    let mut t = la::sub(&v, &la::scale(la::dot(&v, &x), &x));
    t[m..].fill(0.0);
    prop_assume!(la::norm(&t) > 1e-6);
    let t = la::scale(length / la::norm(&t), &t);
    let raw = exp_map(&x, &t);
    prop_assert!((la::norm(&raw) - 1.0).abs() <= 1e-12, "|exp| - 1 = {}", la::norm(&raw) - 1.0);
    let base = UnitVector::new(&x[..m]).unwrap();
    let tv = TangentVector::new(base, &t[..m]).unwrap();
    let y = sphere_exp(&tv);
    let n = y.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
    prop_assert!((n - 1.0).abs() <= 1e-12);
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Rules of every exactness integrate monomials of total degree up to it to 1e-14.
pub fn check_quadrature(dim: usize, exactness: usize, exps: [usize; 3], graded: Option<(usize, usize)>) -> Result<(), TestCaseError> {
    let q = exactness.min(MAX_EXACTNESS);
    let mut e = [0usize; 3];
    let mut left = q;
    for i in 0..dim {
        e[i] = exps[i].min(left);
        left -= e[i];
    }
    let mut rule = quadrature_rule(dim, q).unwrap();
    if let Some((corner, depth)) = graded {
        if dim > 1 {
            rule = graded_rule(&rule, corner % (dim + 1), depth);
        }
    }
    let got = rule.integrate(|x| (0..dim).map(|i| x[i].powi(e[i] as i32)).product());
    let s: usize = e[..dim].iter().sum();
    let want = e[..dim].iter().map(|&k| factorial(k)).product::<f64>() / factorial(s + dim);
    prop_assert!((got - want).abs() <= 1e-14, "dim {dim} q {q} {e:?}: {got} vs {want}");
    Ok(())
}

/// Collects every iterate's unit defect and the records.
#[derive(Default)]
pub struct IterateAudit {
    pub max_unit_defect: f64,
    pub iterates: usize,
    pub records: Vec<IterationRecord>,
}

impl TraceObserver for IterateAudit {
    fn record(&mut self, record: &IterationRecord) {
        self.records.push(*record);
    }

    fn iterate(&mut self, field: &CoefficientField) {
        self.iterates += 1;
        self.max_unit_defect = self.max_unit_defect.max(field.max_unit_defect());
    }
}

fn non_increasing(initial: f64, energies: impl Iterator<Item = f64>) -> Result<(), TestCaseError> {
    let mut last = initial;
    for e in energies {
        prop_assert!(e <= last, "energy rose from {last} to {e}");
        last = e;
    }
    Ok(())
}

/// Every trust-region iterate has unit nodes (1e-12) and accepted steps
/// never increase the energy.
pub fn check_trust_region(
    shape: Shape,
    kind: DiscretizationKind,
    norm: TrustRegionNorm,
    p: &[Vec3],
    amp: f64,
) -> Result<(), TestCaseError> {
    let f = perturbed_field(shape, p, amp);
    let cfg = TrustRegionConfig {
        norm,
        max_iters: 30,
        ..Default::default()
    };
    let mut audit = IterateAudit::default();
    let trace = trust_region_solve_observed(&f, kind, &cfg, &mut audit).unwrap();
    prop_assert!(audit.max_unit_defect <= 1e-12, "unit defect {}", audit.max_unit_defect);
    prop_assert_eq!(audit.iterates, trace.records.iter().filter(|r| r.accepted).count());
    prop_assert_eq!(trace.iterations(), audit.records.len());
    non_increasing(trace.initial_energy, trace.records.iter().filter(|r| r.accepted).map(|r| r.energy))
}

/// Gradient flow without nodal projection never increases the energy.
pub fn check_gradient_flow(shape: Shape, p: &[Vec3], amp: f64, tau: f64) -> Result<(), TestCaseError> {
    let f = perturbed_field(shape, p, amp);
    let cfg = GradientFlowConfig {
        tau,
        max_iters: 60,
        ..Default::default()
    };
    let mut audit = IterateAudit::default();
    let trace = gradient_flow_solve_observed(&f, &cfg, &mut audit).unwrap();
    prop_assert_eq!(audit.iterates, trace.iterations());
    non_increasing(trace.initial_energy, trace.records.iter().map(|r| r.energy))
}

//! Dirichlet energy, its Euclidean and Riemannian derivatives, constraint
//! violation and error norms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::{self, BlockCsr, LinearOperator, Mat3, Vec3};
use crate::mesh::locate_point;
use crate::quadrature::graded_rule;
use crate::space::{self, CoefficientField, Tabulation, MAX_LOCAL};
use crate::sphere;
use crate::tangent::{TangentField, TangentFrames};

/// Quadrature exactness used for the projection-based energy.
pub const PROJECTION_ENERGY_EXACTNESS: usize = 2;
/// Quadrature exactness used for error norms involving projected fields.
pub const ERROR_EXACTNESS: usize = 6;

const UNIT_TOL_RIEMANNIAN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizationKind {
    #[serde(alias = "nc")]
    Nonconforming,
    #[serde(alias = "proj")]
    Projection,
}

impl DiscretizationKind {
    pub fn short_name(self) -> &'static str {
        match self {
            DiscretizationKind::Nonconforming => "nc",
            DiscretizationKind::Projection => "proj",
        }
    }
}

impl fmt::Display for DiscretizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for DiscretizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nc" | "nonconforming" => Ok(DiscretizationKind::Nonconforming),
            "proj" | "projection" | "conforming" => Ok(DiscretizationKind::Projection),
            _ => Err(Error::Config(format!("unknown discretization `{s}`"))),
        }
    }
}

/// Energy with Euclidean gradient (`N` vectors) and Hessian (`m x m` blocks).
#[derive(Debug, Clone)]
pub struct EnergyGradHess {
    pub energy: f64,
    pub gradient: Vec<Vec3>,
    pub hessian: BlockCsr,
}

impl EnergyGradHess {
    /// Euclidean Hessian action on `N` ambient vectors.
    pub fn hessian_apply(&self, m: usize, x: &[Vec3]) -> Vec<Vec3> {
        let flat = flatten(x, m);
        let mut y = vec![0.0; flat.len()];
        self.hessian.apply(&flat, &mut y);
        unflatten(&y, m)
    }
}

pub(crate) fn flatten(x: &[Vec3], m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * m);
    for v in x {
        out.extend_from_slice(&v[..m]);
    }
    out
}

pub(crate) fn unflatten(x: &[f64], m: usize) -> Vec<Vec3> {
    x.chunks_exact(m)
        .map(|c| {
            let mut v = [0.0; 3];
            v[..m].copy_from_slice(c);
            v
        })
        .collect()
}

/// Applies the scalar stiffness matrix to each component.
pub fn stiffness_apply(field: &CoefficientField, x: &[Vec3]) -> Vec<Vec3> {
    let k = field.space().stiffness();
    let pattern = k.pattern();
    let mut out = vec![[0.0; 3]; x.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let (range, cols) = pattern.row(i);
        for (v, &j) in k.values()[range].iter().zip(cols) {
            la::axpy(o, *v, &x[j as usize]);
        }
    }
    out
}

/// `(a, b)_* = sum_c a_c^T K b_c`, the H1 seminorm inner product.
pub fn star_inner_product(field: &CoefficientField, a: &[Vec3], b: &[Vec3]) -> f64 {
    stiffness_apply(field, b)
        .iter()
        .zip(a)
        .map(|(kb, a)| la::dot(a, kb))
        .sum()
}

pub fn dirichlet_energy(field: &CoefficientField, kind: DiscretizationKind) -> Result<f64> {
    match kind {
        DiscretizationKind::Nonconforming => {
            Ok(0.5 * star_inner_product(field, field.values(), field.values()))
        }
        DiscretizationKind::Projection => projection_assembly(field, Level::Energy).map(|(e, _, _)| e),
    }
}

pub fn energy_and_gradient(field: &CoefficientField, kind: DiscretizationKind) -> Result<(f64, Vec<Vec3>)> {
    match kind {
        DiscretizationKind::Nonconforming => {
            let g = stiffness_apply(field, field.values());
            let e = 0.5 * g.iter().zip(field.values()).map(|(a, b)| la::dot(a, b)).sum::<f64>();
            Ok((e, g))
        }
        DiscretizationKind::Projection => {
            projection_assembly(field, Level::Gradient).map(|(e, g, _)| (e, g.unwrap()))
        }
    }
}

pub fn energy_derivatives(field: &CoefficientField, kind: DiscretizationKind) -> Result<EnergyGradHess> {
    match kind {
        DiscretizationKind::Nonconforming => {
            let (energy, gradient) = energy_and_gradient(field, kind)?;
            let m = field.m();
            let k = field.space().stiffness();
            let mut hessian = BlockCsr::zeros(k.pattern().clone(), m);
            for (pos, v) in k.values().iter().enumerate() {
                let blk = hessian.block_mut(pos);
                for d in 0..m {
                    blk[d * m + d] = *v;
                }
            }
            Ok(EnergyGradHess {
                energy,
                gradient,
                hessian,
            })
        }
        DiscretizationKind::Projection => {
            let (energy, gradient, hessian) = projection_assembly(field, Level::Hessian)?;
            Ok(EnergyGradHess {
                energy,
                gradient: gradient.unwrap(),
                hessian: hessian.unwrap(),
            })
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Energy,
    Gradient,
    Hessian,
}

fn sym_rank2(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j] + b[i] * a[j];
        }
    }
    m
}

/// `[-(a xh^T + xh a^T) - (a.xh) I + 3 (a.xh) xh xh^T] / r^2`: the derivative of
/// `dP(v) a` with respect to `v`, symmetric in its two indices.
fn curvature_matrix(xh: &Vec3, r: f64, a: &Vec3) -> Mat3 {
    let ax = la::dot(a, xh);
    let mut m = sym_rank2(a, xh);
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = (-m[i][j] - ax * id + 3.0 * ax * xh[i] * xh[j]) / (r * r);
        }
    }
    m
}

/// Second derivative in `v` of `g^T dP(v) z`.
fn second_variation(v: &Vec3, r: f64, g: &Vec3, z: &Vec3) -> Mat3 {
    let (gz, vz, gv) = (la::dot(g, z), la::dot(v, z), la::dot(g, v));
    let (r3, r5, r7) = (r.powi(3), r.powi(5), r.powi(7));
    let gzs = sym_rank2(g, z);
    let gvs = sym_rank2(g, v);
    let zvs = sym_rank2(z, v);
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            let vv = v[i] * v[j];
            s[i][j] = -gz / r3 * id + 3.0 * gz / r5 * vv - gzs[i][j] / r3
                + 3.0 * vz / r5 * gvs[i][j]
                + 3.0 * gv / r5 * zvs[i][j]
                + 3.0 * gv * vz / r5 * id
                - 15.0 * gv * vz / r7 * vv;
        }
    }
    s
}

type Assembly = (f64, Option<Vec<Vec3>>, Option<BlockCsr>);

fn projection_assembly(field: &CoefficientField, level: Level) -> Result<Assembly> {
    let space = field.space();
    let mesh = space.mesh();
    let dim = space.dim();
    let m = field.m();
    let nloc = space.nodes_per_element();
    let tab = space.tabulate(PROJECTION_ENERGY_EXACTNESS)?;
    let mut energy = 0.0;
    let mut gradient = (level >= Level::Gradient).then(|| vec![[0.0; 3]; space.num_nodes()]);
    let mut hessian = (level >= Level::Hessian).then(|| BlockCsr::zeros(space.pattern(), m));

    for e in 0..mesh.num_elements() {
        let aff = mesh.affine(e);
        let coeffs = field.local_values(e);
        let nodes = space.element_nodes(e);
        let mut e_loc = 0.0;
        let mut g_loc = [[0.0; 3]; MAX_LOCAL];
        let mut h_loc = [[[[0.0; 3]; 3]; MAX_LOCAL]; MAX_LOCAL];
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = w * aff.det.abs();
            let phi = &tab.values[q];
            let mut dphi = [[0.0; 3]; MAX_LOCAL];
            for a in 0..nloc {
                dphi[a] = aff.push_gradient(&tab.ref_grads[q][a]);
            }
            let (v, grad) = space::polynomial_at(&aff, nloc, &coeffs, phi, &tab.ref_grads[q]);
            let (xh, r) = sphere::project(&v).map_err(|err| err.at_element(e))?;
            let dp = sphere::jacobian(&v)?;
            let mut zs = [[0.0; 3]; 3];
            let mut fs = [[0.0; 3]; 3];
            for k in 0..dim {
                zs[k] = [grad[0][k], grad[1][k], grad[2][k]];
                fs[k] = la::mat_vec(&dp, &zs[k]);
                e_loc += 0.5 * wq * la::dot(&fs[k], &fs[k]);
            }
            if level < Level::Gradient {
                continue;
            }
            let mut ms = [[[0.0; 3]; 3]; 3];
            for k in 0..dim {
                ms[k] = curvature_matrix(&xh, r, &zs[k]);
                let mf = la::mat_vec(&ms[k], &fs[k]);
                let pf = la::mat_vec(&dp, &fs[k]);
                for a in 0..nloc {
                    la::axpy(&mut g_loc[a], wq * phi[a], &mf);
                    la::axpy(&mut g_loc[a], wq * dphi[a][k], &pf);
                }
            }
            if level < Level::Hessian {
                continue;
            }
            let pp = la::mat_mul(&dp, &dp);
            let mut x = [[0.0; 3]; 3];
            let mut ys = [[[0.0; 3]; 3]; 3];
            for k in 0..dim {
                let mm = la::mat_mul(&ms[k], &ms[k]);
                let s = second_variation(&v, r, &fs[k], &zs[k]);
                la::mat_add_scaled(&mut x, 1.0, &mm);
                la::mat_add_scaled(&mut x, 1.0, &s);
                let d = curvature_matrix(&xh, r, &fs[k]);
                ys[k] = la::mat_mul(&ms[k], &dp);
                la::mat_add_scaled(&mut ys[k], 1.0, &d);
            }
            for a in 0..nloc {
                for b in 0..nloc {
                    let blk = &mut h_loc[a][b];
                    la::mat_add_scaled(blk, wq * phi[a] * phi[b], &x);
                    la::mat_add_scaled(blk, wq * la::dot(&dphi[a], &dphi[b]), &pp);
                    for k in 0..dim {
                        la::mat_add_scaled(blk, wq * phi[a] * dphi[b][k], &ys[k]);
                        la::mat_add_scaled(blk, wq * phi[b] * dphi[a][k], &la::transpose(&ys[k]));
                    }
                }
            }
        }
        energy += e_loc;
        if let Some(g) = gradient.as_mut() {
            for a in 0..nloc {
                la::axpy(&mut g[nodes[a] as usize], 1.0, &g_loc[a]);
            }
        }
        if let Some(h) = hessian.as_mut() {
            let pattern = h.pattern().clone();
            for a in 0..nloc {
                for b in 0..nloc {
                    let pos = pattern
                        .position(nodes[a] as usize, nodes[b] as usize)
                        .expect("pattern covers element");
                    let blk = h.block_mut(pos);
                    for i in 0..m {
                        for j in 0..m {
                            blk[i * m + j] += h_loc[a][b][i][j];
                        }
                    }
                }
            }
        }
    }
    if let Some(g) = gradient.as_mut() {
        for v in g.iter_mut() {
            v[m..].fill(0.0);
        }
    }
    Ok((energy, gradient, hessian))
}

fn check_unit(field: &CoefficientField) -> Result<()> {
    for (i, v) in field.values().iter().enumerate() {
        let n = la::norm(v);
        if (n - 1.0).abs() > UNIT_TOL_RIEMANNIAN {
            return Err(Error::NonUnitNode { node: i, norm: n });
        }
    }
    Ok(())
}

/// Tangential part of the Euclidean gradient in the nodal frames; Dirichlet
/// nodes carry zero.
pub fn riemannian_gradient(field: &CoefficientField, egh: &EnergyGradHess) -> Result<TangentField> {
    check_unit(field)?;
    let frames = TangentFrames::new(field);
    Ok(riemannian_gradient_in(&frames, field, &egh.gradient))
}

pub(crate) fn riemannian_gradient_in(frames: &TangentFrames, field: &CoefficientField, g: &[Vec3]) -> TangentField {
    let mut t = frames.to_tangent(g);
    t.zero_fixed(field.space().boundary_flags());
    t
}

/// `B^T H B w - (u_i . g_i) w_i` on free nodes.
pub fn riemannian_hessian_apply(
    field: &CoefficientField,
    egh: &EnergyGradHess,
    w: &TangentField,
) -> Result<TangentField> {
    check_unit(field)?;
    let frames = TangentFrames::new(field);
    let fixed = field.space().boundary_flags();
    let mut w = w.clone();
    w.zero_fixed(fixed);
    let amb = frames.to_ambient(&w);
    let hw = egh.hessian_apply(field.m(), &amb);
    let mut out = frames.to_tangent(&hw);
    let k = field.m() - 1;
    for (i, (u, g)) in field.values().iter().zip(&egh.gradient).enumerate() {
        let ug = la::dot(u, g);
        for c in 0..k {
            out.values_mut()[i * k + c] -= ug * w.values()[i * k + c];
        }
    }
    out.zero_fixed(fixed);
    Ok(out)
}

/// Assembled Riemannian Hessian in tangent coordinates, identity on Dirichlet nodes.
pub fn riemannian_hessian_matrix(field: &CoefficientField, egh: &EnergyGradHess, frames: &TangentFrames) -> BlockCsr {
    let shift: Vec<f64> = field
        .values()
        .iter()
        .zip(&egh.gradient)
        .map(|(u, g)| la::dot(u, g))
        .collect();
    frames.reduce_operator(&egh.hessian, 1.0, Some(&shift), field.space().boundary_flags())
}

/// `int |f|` over a simplex for affine `f` with the given vertex values, as a
/// fraction of the simplex volume.
pub fn affine_abs_integral(dim: usize, f: &[f64]) -> f64 {
    let f = &f[..=dim];
    let mean = f.iter().sum::<f64>() / (dim + 1) as f64;
    2.0 * positive_part(dim, f) - mean
}

fn positive_part(dim: usize, f: &[f64]) -> f64 {
    let n = dim + 1;
    let npos = f.iter().filter(|&&x| x > 0.0).count();
    let mean = f.iter().sum::<f64>() / n as f64;
    // one vertex above zero: the positive region is a corner simplex
    let corner = |vals: &[f64], p: usize| -> f64 {
        let fp = vals[p];
        let mut ratio = 1.0;
        for (j, &fj) in vals.iter().enumerate() {
            if j != p {
                ratio *= fp / (fp - fj);
            }
        }
        ratio * fp / n as f64
    };
    if npos == 0 {
        0.0
    } else if npos == n {
        mean
    } else if npos == 1 {
        corner(f, f.iter().position(|&x| x > 0.0).unwrap())
    } else if npos == n - 1 {
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let q = f.iter().position(|&x| x <= 0.0).unwrap();
        mean + corner(&neg, q)
    } else {
        prism_part(f)
    }
}

/// Two positive and two non-positive vertices of a tetrahedron.
fn prism_part(f: &[f64]) -> f64 {
    let pos: Vec<usize> = (0..4).filter(|&i| f[i] > 0.0).collect();
    let neg: Vec<usize> = (0..4).filter(|&i| f[i] <= 0.0).collect();
    let vertex = |i: usize| {
        let mut b = [0.0; 4];
        b[i] = 1.0;
        (b, f[i])
    };
    let cut = |i: usize, j: usize| {
        let t = f[i] / (f[i] - f[j]);
        let mut b = [0.0; 4];
        b[i] = 1.0 - t;
        b[j] = t;
        (b, 0.0)
    };
    let a = [vertex(pos[0]), cut(pos[0], neg[0]), cut(pos[0], neg[1])];
    let b = [vertex(pos[1]), cut(pos[1], neg[0]), cut(pos[1], neg[1])];
    let tets = [
        [a[0], a[1], a[2], b[2]],
        [a[0], a[1], b[1], b[2]],
        [a[0], b[0], b[1], b[2]],
    ];
    tets.iter()
        .map(|t| {
            let mut m = [[0.0; 3]; 3];
            for k in 0..3 {
                for c in 0..3 {
                    m[k][c] = t[k + 1].0[c + 1] - t[0].0[c + 1];
                }
            }
            let (_, det) = la::invert(3, &m);
            det.abs() * (t[0].1 + t[1].1 + t[2].1 + t[3].1) / 4.0
        })
        .sum()
}

/// `delta1 = int I_h(|u| - 1)` and `int I_h ||u|^2 - 1|` with the piecewise
/// linear nodal interpolant (on the red-refined mesh for `p = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub delta1: f64,
    pub squared: f64,
}

pub fn constraint_violation(field: &CoefficientField) -> ConstraintViolation {
    let space = field.space();
    let dim = space.dim();
    let lin: Vec<f64> = field.values().iter().map(|v| la::norm(v) - 1.0).collect();
    let sq: Vec<f64> = field.values().iter().map(|v| la::dot(v, v) - 1.0).collect();
    let coords = space.node_coords();
    let mut out = ConstraintViolation {
        delta1: 0.0,
        squared: 0.0,
    };
    for e in 0..space.mesh().num_elements() {
        let nodes = space.element_nodes(e);
        for sub in space.refined_local_simplices(e) {
            let mut idx = [0usize; 4];
            for (d, &k) in idx.iter_mut().zip(&sub[..=dim]) {
                *d = nodes[k] as usize;
            }
            let mut jac = [[0.0; 3]; 3];
            for k in 0..dim {
                for i in 0..dim {
                    jac[i][k] = coords[idx[k + 1]][i] - coords[idx[0]][i];
                }
            }
            let (_, det) = la::invert(dim, &jac);
            let vol = det.abs() / if dim == 2 { 2.0 } else { 6.0 };
            let fl = idx.map(|i| lin[i]);
            let fs = idx.map(|i| sq[i]);
            out.delta1 += vol * affine_abs_integral(dim, &fl);
            out.squared += vol * affine_abs_integral(dim, &fs);
        }
    }
    out
}

pub fn delta1(field: &CoefficientField) -> f64 {
    constraint_violation(field).delta1
}

/// Reference for [`error_norms`]: a discrete field or a closed-form map with gradient.
pub enum Reference<'a> {
    Field(&'a CoefficientField, DiscretizationKind),
    /// Closed-form map. Elements with a vertex at `singular` integrate with
    /// a rule graded towards that vertex.
    Map {
        map: &'a dyn Fn(&Vec3) -> Result<(Vec3, Mat3)>,
        singular: Option<Vec3>,
    },
}

/// Subdivision depth of the graded error rule.
pub const GRADED_DEPTH: usize = 20;

/// `(|u_f - u_ref|_{L2}, |u_f - u_ref|_{H1})` by quadrature on the mesh of `fine`.
pub fn error_norms(fine: &CoefficientField, kind: DiscretizationKind, reference: Reference<'_>) -> Result<(f64, f64)> {
    let space = fine.space();
    let mesh = space.mesh();
    let dim = space.dim();
    let exact_nc = matches!(
        (&reference, kind),
        (Reference::Field(_, DiscretizationKind::Nonconforming), DiscretizationKind::Nonconforming)
    );
    let exactness = if exact_nc {
        (2 * space.order() + 2).min(ERROR_EXACTNESS)
    } else {
        ERROR_EXACTNESS
    };
    let tab = space.tabulate(exactness)?;
    let singular = match &reference {
        Reference::Map { singular, .. } => *singular,
        Reference::Field(..) => None,
    };
    let graded: Vec<Tabulation> = match singular {
        Some(_) => (0..=dim)
            .map(|c| Tabulation::new(space.order(), dim, graded_rule(&tab.rule, c, GRADED_DEPTH)))
            .collect(),
        None => Vec::new(),
    };
    let tol = 1e-9 * mesh.mesh_size();
    let nloc = space.nodes_per_element();
    let (mut l2, mut h1) = (0.0, 0.0);
    for e in 0..mesh.num_elements() {
        let aff = mesh.affine(e);
        let coeffs = fine.local_values(e);
        let corner = singular.and_then(|p| {
            mesh.element(e)
                .iter()
                .position(|&v| la::norm(&la::sub(&mesh.vertex(v as usize), &p)) < tol)
        });
        let tab = corner.map_or(&tab, |c| &graded[c]);
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = w * aff.det.abs();
            let (mut v, mut g) = space::polynomial_at(&aff, nloc, &coeffs, &tab.values[q], &tab.ref_grads[q]);
            if kind == DiscretizationKind::Projection {
                (v, g) = space::project_value_and_gradient(&v, &g).map_err(|err| err.at_element(e))?;
            }
            let x = aff.point(&tab.rule.points[q]);
            let (rv, rg) = match &reference {
                Reference::Field(c, ckind) => {
                    let (ce, lam) = locate_point(c.space().mesh(), &x)?;
                    match ckind {
                        DiscretizationKind::Nonconforming => space::evaluate_nc(c, ce, &lam),
                        DiscretizationKind::Projection => space::evaluate_proj(c, ce, &lam)?,
                    }
                }
                Reference::Map { map, .. } => map(&x)?,
            };
            let d = la::sub(&v, &rv);
            l2 += wq * la::dot(&d, &d);
            for i in 0..3 {
                for k in 0..dim {
                    h1 += wq * (g[i][k] - rg[i][k]).powi(2);
                }
            }
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// `EOC_k = log2(e_{k-1} / e_k)`.
///
/// Fed with differences of consecutive levels this is the three-level
/// variant `log2(|u_4h - u_2h| / |u_2h - u_h|)`.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::NonPositiveError(bad));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;
    use crate::space::{interpolate, lagrange_space};
    use std::sync::Arc;

    /// Mean of `|f|` through the B-spline density of an affine function on a
    /// simplex: a divided difference of `|t| t^n / (n + 1)`.
    fn divided_difference_abs(f: &[f64]) -> f64 {
        let n = f.len() - 1;
        let g = |t: f64| t.abs() * t.powi(n as i32);
        let mut s = 0.0;
        for (i, &fi) in f.iter().enumerate() {
            let den: f64 = f.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &fj)| fi - fj).product();
            s += g(fi) / den;
        }
        s / (n + 1) as f64
    }

    #[test]
    fn affine_abs_integral_matches_divided_differences() {
        let cases: [&[f64]; 6] = [
            &[1.0, -2.0, 0.5],
            &[-1.0, -2.0, 0.5],
            &[0.3, 0.2, 0.1],
            &[1.0, -1.0, 0.5, -0.25],
            &[1.0, 2.0, -0.5, 0.3],
            &[-1.0, -2.0, 0.5, -0.3],
        ];
        for f in cases {
            let dim = f.len() - 1;
            let got = affine_abs_integral(dim, f);
            assert!((got - divided_difference_abs(f)).abs() < 1e-13, "{f:?}");
        }
    }

    #[test]
    fn delta1_of_scaled_constant() {
        let s = lagrange_space(Arc::new(build_uniform_mesh(2, 2).unwrap()), 2).unwrap();
        let f = CoefficientField::constant(s, 3, [1.1, 0.0, 0.0]).unwrap();
        assert!((delta1(&f) - 0.1).abs() < 1e-12);
        let f = CoefficientField::constant(f.space().clone(), 3, [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(delta1(&f), 0.0);
    }

    #[test]
    fn constant_fields_have_no_energy() {
        for kind in [DiscretizationKind::Nonconforming, DiscretizationKind::Projection] {
            let s = lagrange_space(Arc::new(build_uniform_mesh(3, 1).unwrap()), 2).unwrap();
            let f = CoefficientField::constant(s, 3, [0.0, 0.6, 0.8]).unwrap();
            let egh = energy_derivatives(&f, kind).unwrap();
            assert!(egh.energy.abs() < 1e-14);
            assert!(egh.gradient.iter().all(|g| la::norm(g) < 1e-12));
        }
    }

    #[test]
    fn error_norm_closed_forms() {
        let s = lagrange_space(Arc::new(build_uniform_mesh(2, 2).unwrap()), 1).unwrap();
        let a = interpolate(&s, 2, |_| Ok([1.0, 0.0, 0.0])).unwrap();
        let b = interpolate(&s, 2, |_| Ok([0.0, 1.0, 0.0])).unwrap();
        let kind = DiscretizationKind::Nonconforming;
        let (l2, h1) = error_norms(&a, kind, Reference::Field(&b, kind)).unwrap();
        assert!((l2 - 2f64.sqrt()).abs() < 1e-12 && h1 < 1e-12);
        let (l2, h1) = error_norms(&a, kind, Reference::Field(&a, kind)).unwrap();
        assert_eq!((l2, h1), (0.0, 0.0));
    }

    fn bumpy_field(dim: usize, p: usize, m: usize) -> CoefficientField {
        let s = lagrange_space(Arc::new(build_uniform_mesh(dim, 1).unwrap()), p).unwrap();
        interpolate(&s, m, |x| {
            let v = [1.0 + x[0] + 0.3 * x[1], 0.4 * x[1] - x[2] + 0.2, 0.7 + 0.5 * x[0] * x[1]];
            Ok(if m == 2 { [v[0], v[1], 0.0] } else { v })
        })
        .unwrap()
    }

    #[test]
    fn projection_derivatives_match_finite_differences() {
        for (dim, p, m) in [(2, 1, 3), (2, 2, 2), (3, 1, 3), (3, 2, 3)] {
            let f = bumpy_field(dim, p, m);
            let kind = DiscretizationKind::Projection;
            let egh = energy_derivatives(&f, kind).unwrap();
            let n = f.values().len();
            let dir: Vec<Vec3> = (0..n)
                .map(|i| {
                    let t = i as f64;
                    let mut d = [(0.3 * t).sin(), (0.7 * t).cos(), (1.1 * t).sin()];
                    d[m..].fill(0.0);
                    d
                })
                .collect();
            let h = 1e-5;
            let shifted = |s: f64| {
                let vals = f.values().iter().zip(&dir).map(|(v, d)| la::add(v, &la::scale(s, d))).collect();
                CoefficientField::new(f.space().clone(), m, vals).unwrap()
            };
            let (ep, gp) = energy_and_gradient(&shifted(h), kind).unwrap();
            let (em, gm) = energy_and_gradient(&shifted(-h), kind).unwrap();
            let fd = (ep - em) / (2.0 * h);
            let an: f64 = egh.gradient.iter().zip(&dir).map(|(g, d)| la::dot(g, d)).sum();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{dim} {p} {m}: {fd} {an}");
            let hd = egh.hessian_apply(m, &dir);
            for i in 0..n {
                for c in 0..m {
                    let fdh = (gp[i][c] - gm[i][c]) / (2.0 * h);
                    assert!((fdh - hd[i][c]).abs() < 1e-5, "{dim} {p} {m} node {i}: {fdh} {}", hd[i][c]);
                }
            }
        }
    }

    #[test]
    fn nonconforming_energy_of_linear_map() {
        let s = lagrange_space(Arc::new(build_uniform_mesh(3, 2).unwrap()), 2).unwrap();
        let f = interpolate(&s, 3, |x| Ok([x[0], 2.0 * x[1], 0.0])).unwrap();
        let e = dirichlet_energy(&f, DiscretizationKind::Nonconforming).unwrap();
        assert!((e - 2.5).abs() < 1e-12);
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[0.4, 0.1]).unwrap()[0] - 2.0).abs() < 1e-15);
        assert_eq!(eoc(&[1.0, 1.0]).unwrap(), vec![0.0]);
        assert!(eoc(&[1.0, 0.0]).is_err());
    }
}

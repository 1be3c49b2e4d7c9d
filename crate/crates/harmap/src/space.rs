//! Lagrange spaces of order 1 and 2, coefficient fields and their evaluation.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::la::{self, BlockCsr, Mat3, SparsityPattern, Vec3};
use crate::mesh::SimplicialMesh;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::sphere;

/// Local edges in the order of the local edge nodes.
pub const EDGES_2D: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
pub const EDGES_3D: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Maximal number of local nodes (P2 on a tetrahedron).
pub const MAX_LOCAL: usize = 10;

pub fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &EDGES_2D
    } else {
        &EDGES_3D
    }
}

pub fn local_node_count(order: usize, dim: usize) -> usize {
    match (order, dim) {
        (1, d) => d + 1,
        (_, 2) => 6,
        _ => 10,
    }
}

/// Shape function values and gradients with respect to reference coordinates.
#[inline]
pub fn shape_into(
    order: usize,
    dim: usize,
    lam: &[f64],
    vals: &mut [f64; MAX_LOCAL],
    grads: &mut [Vec3; MAX_LOCAL],
) {
    let grad_lambda = |i: usize| -> Vec3 {
        let mut g = [0.0; 3];
        if i == 0 {
            g[..dim].fill(-1.0);
        } else {
            g[i - 1] = 1.0;
        }
        g
    };
    if order == 1 {
        for i in 0..=dim {
            vals[i] = lam[i];
            grads[i] = grad_lambda(i);
        }
        return;
    }
    for i in 0..=dim {
        vals[i] = lam[i] * (2.0 * lam[i] - 1.0);
        grads[i] = la::scale(4.0 * lam[i] - 1.0, &grad_lambda(i));
    }
    for (k, &(i, j)) in local_edges(dim).iter().enumerate() {
        vals[dim + 1 + k] = 4.0 * lam[i] * lam[j];
        let mut g = la::scale(4.0 * lam[j], &grad_lambda(i));
        la::axpy(&mut g, 4.0 * lam[i], &grad_lambda(j));
        grads[dim + 1 + k] = g;
    }
}

/// Values and reference gradients (`dim` entries each) of the local basis.
pub fn shape_functions(order: usize, dim: usize, barycentric: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if order != 1 && order != 2 {
        return Err(Error::Order(order));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::Dimension(dim));
    }
    let mut vals = [0.0; MAX_LOCAL];
    let mut grads = [[0.0; 3]; MAX_LOCAL];
    shape_into(order, dim, barycentric, &mut vals, &mut grads);
    let n = local_node_count(order, dim);
    Ok((
        vals[..n].to_vec(),
        grads[..n].iter().map(|g| g[..dim].to_vec()).collect(),
    ))
}

/// Shape functions evaluated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub nloc: usize,
    pub rule: QuadratureRule,
    pub values: Vec<[f64; MAX_LOCAL]>,
    pub ref_grads: Vec<[Vec3; MAX_LOCAL]>,
}

impl Tabulation {
    pub fn new(order: usize, dim: usize, rule: QuadratureRule) -> Self {
        let mut values = Vec::with_capacity(rule.len());
        let mut ref_grads = Vec::with_capacity(rule.len());
        for p in &rule.points {
            let mut v = [0.0; MAX_LOCAL];
            let mut g = [[0.0; 3]; MAX_LOCAL];
            shape_into(order, dim, p, &mut v, &mut g);
            values.push(v);
            ref_grads.push(g);
        }
        Tabulation {
            nloc: local_node_count(order, dim),
            rule,
            values,
            ref_grads,
        }
    }
}

#[derive(Debug)]
pub struct LagrangeSpace {
    mesh: Arc<SimplicialMesh>,
    order: usize,
    node_coords: Vec<Vec3>,
    element_nodes: Vec<u32>,
    boundary: Vec<bool>,
    nloc: usize,
    pattern: OnceLock<Arc<SparsityPattern>>,
    stiffness: OnceLock<Arc<BlockCsr>>,
}

pub fn lagrange_space(mesh: Arc<SimplicialMesh>, order: usize) -> Result<Arc<LagrangeSpace>> {
    LagrangeSpace::new(mesh, order).map(Arc::new)
}

impl LagrangeSpace {
    pub fn new(mesh: Arc<SimplicialMesh>, order: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::Order(order));
        }
        let dim = mesh.dim();
        let nv = dim + 1;
        let nloc = local_node_count(order, dim);
        let mut node_coords = mesh.vertices().to_vec();
        let mut boundary = mesh.boundary_flags().to_vec();
        let element_nodes = if order == 1 {
            mesh.elements().to_vec()
        } else {
            let mut edges: Vec<(u32, u32)> = Vec::with_capacity(mesh.num_elements() * 6);
            for el in mesh.elements().chunks_exact(nv) {
                for &(i, j) in local_edges(dim) {
                    edges.push((el[i].min(el[j]), el[i].max(el[j])));
                }
            }
            edges.sort_unstable();
            edges.dedup();
            let first = node_coords.len();
            if first + edges.len() > u32::MAX as usize {
                return Err(Error::IndexOverflow {
                    dim,
                    level: mesh.level(),
                });
            }
            for &(a, b) in &edges {
                let (pa, pb) = (mesh.vertex(a as usize), mesh.vertex(b as usize));
                let mid = la::scale(0.5, &la::add(&pa, &pb));
                node_coords.push(mid);
                boundary.push(mid[..dim].iter().any(|c| (c.abs() - 0.5).abs() <= 1e-12));
            }
            let mut out = Vec::with_capacity(mesh.num_elements() * nloc);
            for el in mesh.elements().chunks_exact(nv) {
                out.extend_from_slice(el);
                for &(i, j) in local_edges(dim) {
                    let key = (el[i].min(el[j]), el[i].max(el[j]));
                    let k = edges.binary_search(&key).expect("edge present");
                    out.push((first + k) as u32);
                }
            }
            out
        };
        Ok(LagrangeSpace {
            mesh,
            order,
            node_coords,
            element_nodes,
            boundary,
            nloc,
            pattern: OnceLock::new(),
            stiffness: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nloc
    }

    pub fn node_coords(&self) -> &[Vec3] {
        &self.node_coords
    }

    pub fn element_nodes(&self, e: usize) -> &[u32] {
        &self.element_nodes[e * self.nloc..(e + 1) * self.nloc]
    }

    pub fn all_element_nodes(&self) -> &[u32] {
        &self.element_nodes
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn tabulate(&self, exactness: usize) -> Result<Tabulation> {
        Ok(Tabulation::new(
            self.order,
            self.dim(),
            quadrature_rule(self.dim(), exactness)?,
        ))
    }

    pub fn pattern(&self) -> Arc<SparsityPattern> {
        self.pattern
            .get_or_init(|| {
                Arc::new(SparsityPattern::from_elements(
                    self.num_nodes(),
                    &self.element_nodes,
                    self.nloc,
                ))
            })
            .clone()
    }

    /// Scalar stiffness matrix `(grad phi_i, grad phi_j)`, assembled once.
    pub fn stiffness(&self) -> Arc<BlockCsr> {
        self.stiffness
            .get_or_init(|| Arc::new(self.assemble_stiffness()))
            .clone()
    }

    fn assemble_stiffness(&self) -> BlockCsr {
        let pattern = self.pattern();
        let mut k = BlockCsr::zeros(pattern.clone(), 1);
        let tab = self
            .tabulate(2 * (self.order - 1))
            .expect("stiffness rule available");
        let n = self.nloc;
        for e in 0..self.mesh.num_elements() {
            let aff = self.mesh.affine(e);
            let nodes = self.element_nodes(e);
            let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            for (q, w) in tab.rule.weights.iter().enumerate() {
                let wq = w * aff.det.abs();
                let g: Vec<Vec3> = (0..n)
                    .map(|a| aff.push_gradient(&tab.ref_grads[q][a]))
                    .collect();
                for a in 0..n {
                    for b in 0..n {
                        local[a][b] += wq * la::dot(&g[a], &g[b]);
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    let p = pattern
                        .position(nodes[a] as usize, nodes[b] as usize)
                        .expect("pattern covers element");
                    k.block_mut(p)[0] += local[a][b];
                }
            }
        }
        k
    }

    /// Sub-simplices of the once red-refined element, as local node indices.
    pub fn refined_local_simplices(&self, e: usize) -> Vec<[usize; 4]> {
        let dim = self.dim();
        if self.order == 1 {
            let mut s = [0, 1, 2, 3];
            if dim == 2 {
                s[3] = 0;
            }
            return vec![s];
        }
        let edge = |i: usize, j: usize| -> usize {
            let (a, b) = (i.min(j), i.max(j));
            dim + 1 + local_edges(dim).iter().position(|&x| x == (a, b)).unwrap()
        };
        if dim == 2 {
            let (m01, m02, m12) = (edge(0, 1), edge(0, 2), edge(1, 2));
            return vec![
                [0, m01, m02, 0],
                [m01, 1, m12, 0],
                [m02, m12, 2, 0],
                [m01, m12, m02, 0],
            ];
        }
        let nodes = self.element_nodes(e);
        let coord = |k: usize| self.node_coords[nodes[k] as usize];
        let diagonals = [
            ((0, 2), (1, 3), [(0, 1), (0, 3), (2, 3), (1, 2)]),
            ((0, 1), (2, 3), [(0, 2), (0, 3), (1, 3), (1, 2)]),
            ((0, 3), (1, 2), [(0, 1), (0, 2), (2, 3), (1, 3)]),
        ];
        let mut best = 0;
        let mut best_len = f64::INFINITY;
        for (k, (a, b, _)) in diagonals.iter().enumerate() {
            let d = la::sub(&coord(edge(a.0, a.1)), &coord(edge(b.0, b.1)));
            let len = la::dot(&d, &d);
            if len < best_len - 1e-12 {
                best = k;
                best_len = len;
            }
        }
        let (a, b, ring) = diagonals[best];
        let (ma, mb) = (edge(a.0, a.1), edge(b.0, b.1));
        let r = |k: usize| edge(ring[k % 4].0, ring[k % 4].1);
        vec![
            [0, edge(0, 1), edge(0, 2), edge(0, 3)],
            [edge(0, 1), 1, edge(1, 2), edge(1, 3)],
            [edge(0, 2), edge(1, 2), 2, edge(2, 3)],
            [edge(0, 3), edge(1, 3), edge(2, 3), 3],
            [ma, mb, r(0), r(1)],
            [ma, mb, r(1), r(2)],
            [ma, mb, r(2), r(3)],
            [ma, mb, r(3), r(0)],
        ]
    }
}

/// Nodal vectors in `R^m`, the algebraic unknown of both discretizations.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    space: Arc<LagrangeSpace>,
    m: usize,
    values: Vec<Vec3>,
}

impl PartialEq for CoefficientField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space) && self.m == other.m && self.values == other.values
    }
}

impl CoefficientField {
    pub fn new(space: Arc<LagrangeSpace>, m: usize, values: Vec<Vec3>) -> Result<Self> {
        if m != 2 && m != 3 {
            return Err(Error::TargetDimension(m));
        }
        assert_eq!(values.len(), space.num_nodes(), "one value per node");
        Ok(CoefficientField { space, m, values })
    }

    pub fn constant(space: Arc<LagrangeSpace>, m: usize, c: Vec3) -> Result<Self> {
        let n = space.num_nodes();
        Self::new(space, m, vec![c; n])
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn value(&self, i: usize) -> Vec3 {
        self.values[i]
    }

    /// Values stacked as `N * m` scalars.
    pub fn to_flat(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = Vec::with_capacity(self.values.len() * m);
        for v in &self.values {
            out.extend_from_slice(&v[..m]);
        }
        out
    }

    pub fn local_values(&self, e: usize) -> [Vec3; MAX_LOCAL] {
        let mut out = [[0.0; 3]; MAX_LOCAL];
        for (k, &n) in self.space.element_nodes(e).iter().enumerate() {
            out[k] = self.values[n as usize];
        }
        out
    }

    /// Largest deviation of a nodal norm from one.
    pub fn max_unit_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (la::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Nodal interpolation `values[i] = f(node_i)`.
pub fn interpolate(
    space: &Arc<LagrangeSpace>,
    m: usize,
    f: impl Fn(&Vec3) -> Result<Vec3>,
) -> Result<CoefficientField> {
    let values = space
        .node_coords()
        .iter()
        .map(&f)
        .collect::<Result<Vec<_>>>()?;
    CoefficientField::new(space.clone(), m, values)
}

/// Value and gradient of `sum phi_a c_a`; `grad[i][k] = d u_i / d x_k`.
#[inline]
pub(crate) fn polynomial_at(
    aff: &crate::mesh::Affine,
    nloc: usize,
    coeffs: &[Vec3; MAX_LOCAL],
    vals: &[f64; MAX_LOCAL],
    ref_grads: &[Vec3; MAX_LOCAL],
) -> (Vec3, Mat3) {
    let mut v = [0.0; 3];
    let mut g = [[0.0; 3]; 3];
    for a in 0..nloc {
        la::axpy(&mut v, vals[a], &coeffs[a]);
        let pg = aff.push_gradient(&ref_grads[a]);
        for i in 0..3 {
            for k in 0..3 {
                g[i][k] += coeffs[a][i] * pg[k];
            }
        }
    }
    (v, g)
}

/// Nonconforming evaluation of the polynomial field.
pub fn evaluate_nc(field: &CoefficientField, element: usize, barycentric: &[f64]) -> (Vec3, Mat3) {
    let space = &field.space;
    let mut vals = [0.0; MAX_LOCAL];
    let mut grads = [[0.0; 3]; MAX_LOCAL];
    shape_into(space.order, space.dim(), barycentric, &mut vals, &mut grads);
    let aff = space.mesh.affine(element);
    polynomial_at(&aff, space.nloc, &field.local_values(element), &vals, &grads)
}

/// Projection-based evaluation `P(v)`, `dP(v) grad v`.
pub fn evaluate_proj(field: &CoefficientField, element: usize, barycentric: &[f64]) -> Result<(Vec3, Mat3)> {
    let (v, g) = evaluate_nc(field, element, barycentric);
    project_value_and_gradient(&v, &g).map_err(|e| e.at_element(element))
}

#[inline]
pub(crate) fn project_value_and_gradient(v: &Vec3, g: &Mat3) -> Result<(Vec3, Mat3)> {
    let (p, _) = sphere::project(v)?;
    let dp = sphere::jacobian(v)?;
    Ok((p, la::mat_mul(&dp, g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;

    fn space(dim: usize, r: u32, p: usize) -> Arc<LagrangeSpace> {
        lagrange_space(Arc::new(build_uniform_mesh(dim, r).unwrap()), p).unwrap()
    }

    #[test]
    fn node_counts() {
        assert_eq!(space(2, 1, 1).num_nodes(), 9);
        assert_eq!(space(2, 1, 2).num_nodes(), 25);
        assert_eq!(space(3, 1, 2).num_nodes(), 125);
        assert_eq!(space(3, 2, 1).nodes_per_element(), 4);
        assert_eq!(space(3, 2, 2).nodes_per_element(), 10);
    }

    #[test]
    fn boundary_nodes_are_on_the_boundary() {
        for (dim, p) in [(2, 1), (2, 2), (3, 2)] {
            let s = space(dim, 2, p);
            for (x, &b) in s.node_coords().iter().zip(s.boundary_flags()) {
                let on = x[..dim].iter().any(|c| (c.abs() - 0.5).abs() < 1e-12);
                assert_eq!(on, b);
            }
        }
    }

    #[test]
    fn kronecker_property() {
        for dim in [2, 3] {
            let s = space(dim, 1, 2);
            let aff = s.mesh().affine(3);
            let nodes = s.element_nodes(3);
            for (a, &n) in nodes.iter().enumerate() {
                let lam = aff.barycentric(&s.node_coords()[n as usize]);
                let (vals, _) = shape_functions(2, dim, &lam).unwrap();
                for (b, v) in vals.iter().enumerate() {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn barycenter_values() {
        let (v, _) = shape_functions(1, 3, &[0.25; 4]).unwrap();
        assert!(v.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn stiffness_annihilates_constants() {
        for (dim, p) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
            let s = space(dim, 2, p);
            let k = s.stiffness();
            let mut y = vec![0.0; s.num_nodes()];
            crate::la::LinearOperator::apply(&*k, &vec![1.0; s.num_nodes()], &mut y);
            assert!(y.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn affine_interpolation_at_barycenter() {
        let s = space(2, 1, 1);
        let nodes = s.element_nodes(0).to_vec();
        let mut vals = vec![[0.0; 3]; s.num_nodes()];
        vals[nodes[0] as usize] = [1.0, 0.0, 0.0];
        vals[nodes[1] as usize] = [0.0, 1.0, 0.0];
        vals[nodes[2] as usize] = [1.0, 0.0, 0.0];
        let f = CoefficientField::new(s, 3, vals).unwrap();
        let (v, _) = evaluate_nc(&f, 0, &[1.0 / 3.0; 3]);
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15 && (v[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_edge_is_singular() {
        let s = space(2, 1, 1);
        let nodes = s.element_nodes(0).to_vec();
        let mut vals = vec![[1.0, 0.0, 0.0]; s.num_nodes()];
        vals[nodes[1] as usize] = [-1.0, 0.0, 0.0];
        let f = CoefficientField::new(s, 2, vals).unwrap();
        let r = evaluate_proj(&f, 0, &[0.5, 0.5, 0.0]);
        assert!(matches!(r, Err(Error::SingularProjection { element: Some(0), .. })));
    }
}

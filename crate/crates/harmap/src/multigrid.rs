//! Geometric multigrid for the scalar stiffness matrix with Dirichlet rows,
//! and its use as a preconditioner in tangent coordinates.

use std::sync::Arc;

use crate::error::Result;
use crate::la::{BlockCsr, DenseCholesky, LinearOperator, Vec3};
use crate::mesh::{build_hierarchy, locate_point};
use crate::space::{lagrange_space, shape_into, LagrangeSpace, MAX_LOCAL};
use crate::tangent::{TangentField, TangentFrames};

/// Interpolation from a coarse space into a fine one, stored by fine rows.
#[derive(Debug, Clone)]
struct Prolongation {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    ncoarse: usize,
}

impl Prolongation {
    fn new(coarse: &LagrangeSpace, fine: &LagrangeSpace) -> Result<Self> {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut vals = [0.0; MAX_LOCAL];
        let mut grads = [[0.0; 3]; MAX_LOCAL];
        for (i, x) in fine.node_coords().iter().enumerate() {
            if !fine.is_boundary(i) {
                let (e, lam) = locate_point(coarse.mesh(), x)?;
                shape_into(coarse.order(), coarse.dim(), &lam, &mut vals, &mut grads);
                for (a, &node) in coarse.element_nodes(e).iter().enumerate() {
                    if vals[a].abs() > 1e-13 && !coarse.is_boundary(node as usize) {
                        cols.push(node);
                        weights.push(vals[a]);
                    }
                }
            }
            offsets.push(cols.len());
        }
        Ok(Prolongation {
            offsets,
            cols,
            weights,
            ncoarse: coarse.num_nodes(),
        })
    }

    /// `y += P x`
    fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.offsets[i]..self.offsets[i + 1];
            for (c, w) in self.cols[r.clone()].iter().zip(&self.weights[r]) {
                *yi += w * x[*c as usize];
            }
        }
    }

    /// `P^T x`
    fn restrict(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncoarse];
        for (i, xi) in x.iter().enumerate() {
            let r = self.offsets[i]..self.offsets[i + 1];
            for (c, w) in self.cols[r.clone()].iter().zip(&self.weights[r]) {
                y[*c as usize] += w * xi;
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
struct Level {
    matrix: Arc<BlockCsr>,
    diagonal: Vec<f64>,
    /// Interpolation from the next coarser level.
    prolongation: Option<Prolongation>,
}

/// V-cycle with a forward Gauss-Seidel sweep before and a backward sweep after
/// the coarse correction and a dense solve on the coarsest level.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: DenseCholesky,
}

fn dirichlet_stiffness(space: &LagrangeSpace) -> Arc<BlockCsr> {
    let mut k = (*space.stiffness()).clone();
    k.apply_dirichlet(space.boundary_flags());
    Arc::new(k)
}

impl Multigrid {
    /// Hierarchy of first-order spaces on all coarser uniform meshes below `space`.
    pub fn new(space: &Arc<LagrangeSpace>) -> Result<Self> {
        let mesh = space.mesh();
        let mut spaces: Vec<Arc<LagrangeSpace>> = Vec::new();
        if mesh.level() > 1 {
            for m in build_hierarchy(mesh.dim(), mesh.level() - 1)? {
                spaces.push(lagrange_space(m, 1)?);
            }
        }
        if space.order() == 2 {
            spaces.push(lagrange_space(mesh.clone(), 1)?);
        }
        spaces.push(space.clone());
        let mut levels: Vec<Level> = Vec::with_capacity(spaces.len());
        for (l, s) in spaces.iter().enumerate() {
            let matrix = dirichlet_stiffness(s);
            let diagonal = matrix.pattern().diagonal_positions().iter().map(|&p| matrix.values()[p]).collect();
            let prolongation = if l == 0 {
                None
            } else {
                Some(Prolongation::new(&spaces[l - 1], s)?)
            };
            levels.push(Level {
                matrix,
                diagonal,
                prolongation,
            });
        }
        let coarse = DenseCholesky::new(&levels[0].matrix.to_dense()).expect("coarse stiffness is definite");
        Ok(Multigrid { levels, coarse })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn gauss_seidel(level: &Level, b: &[f64], x: &mut [f64], forward: bool) {
        let a = &level.matrix;
        let pattern = a.pattern();
        let values = a.values();
        let n = b.len();
        let mut sweep = |i: usize| {
            let (range, cols) = pattern.row(i);
            let mut s = b[i];
            for (v, &j) in values[range].iter().zip(cols) {
                s -= v * x[j as usize];
            }
            x[i] += s / level.diagonal[i];
        };
        if forward {
            (0..n).for_each(&mut sweep);
        } else {
            (0..n).rev().for_each(&mut sweep);
        }
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == 0 {
            self.coarse.solve(b, x);
            return;
        }
        let level = &self.levels[l];
        x.fill(0.0);
        Self::gauss_seidel(level, b, x, true);
        let mut r = vec![0.0; b.len()];
        level.matrix.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let p = level.prolongation.as_ref().expect("non-coarsest level");
        let rc = p.restrict(&r);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(l - 1, &rc, &mut ec);
        p.apply_add(&ec, x);
        Self::gauss_seidel(level, b, x, false);
    }
}

impl LinearOperator for Multigrid {
    fn dim(&self) -> usize {
        self.levels.last().unwrap().diagonal.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.cycle(self.levels.len() - 1, x, y);
    }
}

/// `B^T (V (x) I_m) B / scale` in tangent coordinates; identity on fixed nodes.
pub struct TangentPreconditioner<'a> {
    pub multigrid: &'a Multigrid,
    pub frames: &'a TangentFrames,
    pub fixed: &'a [bool],
    pub scale: f64,
}

impl LinearOperator for TangentPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.frames.len() * self.frames.rank()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.frames.m();
        let k = self.frames.rank();
        let n = self.frames.len();
        let mut w = TangentField::from_values(m, x.to_vec());
        w.zero_fixed(self.fixed);
        let amb = self.frames.to_ambient(&w);
        let mut out: Vec<Vec3> = vec![[0.0; 3]; n];
        let mut comp = vec![0.0; n];
        let mut res = vec![0.0; n];
        for c in 0..m {
            for (ci, a) in comp.iter_mut().zip(&amb) {
                *ci = a[c];
            }
            self.multigrid.apply(&comp, &mut res);
            for (o, r) in out.iter_mut().zip(&res) {
                o[c] = *r / self.scale;
            }
        }
        let t = self.frames.to_tangent(&out);
        y.copy_from_slice(t.values());
        for (i, &f) in self.fixed.iter().enumerate() {
            if f {
                y[i * k..(i + 1) * k].copy_from_slice(&x[i * k..(i + 1) * k]);
            }
        }
    }
}

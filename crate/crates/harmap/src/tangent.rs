//! Per-node tangent frames and fields in tangent coordinates.

use crate::la::{self, BlockCsr, Vec3};
use crate::space::CoefficientField;
use crate::sphere;

/// Orthonormal frames of the tangent planes at the (normalized) nodal values.
#[derive(Debug, Clone)]
pub struct TangentFrames {
    m: usize,
    frames: Vec<[Vec3; 2]>,
}

impl TangentFrames {
    pub fn new(field: &CoefficientField) -> Self {
        let m = field.m();
        let frames = field
            .values()
            .iter()
            .map(|u| {
                let n = la::norm(u);
                let x = if n > 0.0 { la::scale(1.0 / n, u) } else { *u };
                sphere::frame(&x, m)
            })
            .collect();
        TangentFrames { m, frames }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Tangent dimension per node, `m - 1`.
    pub fn rank(&self) -> usize {
        self.m - 1
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[Vec3; 2] {
        &self.frames[i]
    }

    /// Ambient vectors `B_i w_i`.
    pub fn to_ambient(&self, w: &TangentField) -> Vec<Vec3> {
        let k = self.rank();
        (0..self.len())
            .map(|i| {
                let mut v = [0.0; 3];
                for (c, t) in self.frames[i][..k].iter().enumerate() {
                    la::axpy(&mut v, w.values[i * k + c], t);
                }
                v
            })
            .collect()
    }

    /// Tangent coordinates `B_i^T v_i`.
    pub fn to_tangent(&self, v: &[Vec3]) -> TangentField {
        let k = self.rank();
        let mut out = TangentField::zeros(self.len(), self.m);
        for (i, vi) in v.iter().enumerate() {
            for c in 0..k {
                out.values[i * k + c] = la::dot(&self.frames[i][c], vi);
            }
        }
        out
    }

    /// `B^T A B` with `A` an `m x m` block matrix; fixed nodes get identity rows.
    pub fn reduce_operator(&self, a: &BlockCsr, scale: f64, shift: Option<&[f64]>, fixed: &[bool]) -> BlockCsr {
        let m = self.m;
        let k = self.rank();
        let pattern = a.pattern().clone();
        let mut out = BlockCsr::zeros(pattern.clone(), k);
        for i in 0..pattern.nrows() {
            let (range, cols) = pattern.row(i);
            for (pos, &j) in range.zip(cols) {
                let j = j as usize;
                let blk = a.block(pos);
                let dst = out.block_mut(pos);
                if fixed[i] || fixed[j] {
                    if i == j {
                        for c in 0..k {
                            dst[c * k + c] = 1.0;
                        }
                    }
                    continue;
                }
                for r in 0..k {
                    let bi = &self.frames[i][r];
                    for c in 0..k {
                        let bj = &self.frames[j][c];
                        let mut s = 0.0;
                        for p in 0..m {
                            for q in 0..m {
                                s += bi[p] * blk[p * m + q] * bj[q];
                            }
                        }
                        dst[r * k + c] = scale * s;
                    }
                }
                if i == j {
                    if let Some(shift) = shift {
                        for c in 0..k {
                            dst[c * k + c] -= shift[i];
                        }
                    }
                }
            }
        }
        out
    }
}

/// `N x (m - 1)` tangent coordinates relative to a set of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    m: usize,
    values: Vec<f64>,
}

impl TangentField {
    pub fn zeros(nodes: usize, m: usize) -> Self {
        TangentField {
            m,
            values: vec![0.0; nodes * (m - 1)],
        }
    }

    pub fn from_values(m: usize, values: Vec<f64>) -> Self {
        TangentField { m, values }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let k = self.m - 1;
        &self.values[i * k..(i + 1) * k]
    }

    pub fn dot(&self, other: &TangentField) -> f64 {
        la::dot_slices(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Largest per-component magnitude.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn zero_fixed(&mut self, fixed: &[bool]) {
        let k = self.m - 1;
        for (i, &f) in fixed.iter().enumerate() {
            if f {
                self.values[i * k..(i + 1) * k].fill(0.0);
            }
        }
    }
}

//! Small dense helpers, block sparse matrices and preconditioned conjugate gradients.

use std::sync::Arc;

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `y += s * x`
#[inline]
pub fn axpy(y: &mut Vec3, s: f64, x: &Vec3) {
    y[0] += s * x[0];
    y[1] += s * x[1];
    y[2] += s * x[2];
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

#[inline]
pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

#[inline]
pub fn mat_t_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        axpy(&mut out, v[i], &m[i]);
    }
    out
}

#[inline]
pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            let aik = a[i][k];
            for j in 0..3 {
                m[i][j] += aik * b[k][j];
            }
        }
    }
    m
}

#[inline]
pub fn transpose(a: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[j][i];
        }
    }
    m
}

#[inline]
pub fn mat_add_scaled(acc: &mut Mat3, s: f64, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            acc[i][j] += s * m[i][j];
        }
    }
}

/// Inverse and determinant of the leading `n x n` block of `m`.
pub fn invert(n: usize, m: &Mat3) -> (Mat3, f64) {
    let mut inv = [[0.0; 3]; 3];
    match n {
        1 => {
            inv[0][0] = 1.0 / m[0][0];
            (inv, m[0][0])
        }
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            inv[0][0] = m[1][1] / det;
            inv[0][1] = -m[0][1] / det;
            inv[1][0] = -m[1][0] / det;
            inv[1][1] = m[0][0] / det;
            (inv, det)
        }
        _ => {
            let c = |i: usize, j: usize| {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
            };
            let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
            for i in 0..3 {
                for j in 0..3 {
                    inv[j][i] = c(i, j) / det;
                }
            }
            (inv, det)
        }
    }
}

/// Plain sequential dot product; the fixed order keeps results reproducible.
pub fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_slice(a: &[f64]) -> f64 {
    dot_slices(a, a).sqrt()
}

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Compressed row sparsity pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl SparsityPattern {
    pub fn from_rows(ncols: usize, rows: Vec<Vec<u32>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(&row);
            row_ptr.push(cols.len());
        }
        SparsityPattern {
            nrows,
            ncols,
            row_ptr,
            cols,
        }
    }

    /// Node adjacency of a finite element connectivity (`nloc` nodes per element).
    pub fn from_elements(nnodes: usize, element_nodes: &[u32], nloc: usize) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); nnodes];
        for el in element_nodes.chunks_exact(nloc) {
            for &a in el {
                rows[a as usize].extend_from_slice(el);
            }
        }
        Self::from_rows(nnodes, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (std::ops::Range<usize>, &[u32]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (r.clone(), &self.cols[r])
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (range, cols) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|k| range.start + k)
    }

    pub fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.nrows)
            .map(|i| self.position(i, i).expect("missing diagonal entry"))
            .collect()
    }
}

/// Sparse matrix whose entries are dense `bs x bs` blocks stored row-major.
#[derive(Debug, Clone)]
pub struct BlockCsr {
    pattern: Arc<SparsityPattern>,
    bs: usize,
    values: Vec<f64>,
}

impl BlockCsr {
    pub fn zeros(pattern: Arc<SparsityPattern>, bs: usize) -> Self {
        let values = vec![0.0; pattern.nnz() * bs * bs];
        BlockCsr {
            pattern,
            bs,
            values,
        }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn block_size(&self) -> usize {
        self.bs
    }

    pub fn block(&self, pos: usize) -> &[f64] {
        let s = self.bs * self.bs;
        &self.values[pos * s..(pos + 1) * s]
    }

    pub fn block_mut(&mut self, pos: usize) -> &mut [f64] {
        let s = self.bs * self.bs;
        &mut self.values[pos * s..(pos + 1) * s]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scalar entry `(i, j)` of a `bs = 1` matrix, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.bs, 1);
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Replaces rows and columns of the flagged block rows by the identity.
    pub fn apply_dirichlet(&mut self, fixed: &[bool]) {
        let bs = self.bs;
        for i in 0..self.pattern.nrows() {
            let (range, cols) = self.pattern.row(i);
            let cols = cols.to_vec();
            for (pos, &j) in range.zip(&cols) {
                let j = j as usize;
                if fixed[i] || fixed[j] {
                    let blk = self.block_mut(pos);
                    blk.fill(0.0);
                    if i == j {
                        for d in 0..bs {
                            blk[d * bs + d] = 1.0;
                        }
                    }
                }
            }
        }
    }

    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        y.fill(0.0);
        for i in 0..self.pattern.nrows() {
            let (range, cols) = self.pattern.row(i);
            let xi = &x[i * bs..(i + 1) * bs];
            for (pos, &j) in range.zip(cols) {
                let blk = self.block(pos);
                let yj = &mut y[j as usize * bs..(j as usize + 1) * bs];
                for r in 0..bs {
                    for c in 0..bs {
                        yj[c] += blk[r * bs + c] * xi[r];
                    }
                }
            }
        }
    }

    /// Inverses of the diagonal blocks.
    pub fn inverse_diagonal_blocks(&self) -> Vec<f64> {
        let bs = self.bs;
        let mut out = vec![0.0; self.pattern.nrows() * bs * bs];
        for (i, pos) in self.pattern.diagonal_positions().into_iter().enumerate() {
            let blk = self.block(pos);
            let mut m = [[0.0; 3]; 3];
            for r in 0..bs {
                for c in 0..bs {
                    m[r][c] = blk[r * bs + c];
                }
            }
            let (inv, _) = invert(bs, &m);
            for r in 0..bs {
                for c in 0..bs {
                    out[(i * bs + r) * bs + c] = inv[r][c];
                }
            }
        }
        out
    }

    /// Dense copy, for tests and tiny coarse problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let bs = self.bs;
        let mut d = vec![vec![0.0; self.pattern.ncols() * bs]; self.pattern.nrows() * bs];
        for i in 0..self.pattern.nrows() {
            let (range, cols) = self.pattern.row(i);
            for (pos, &j) in range.zip(cols) {
                let blk = self.block(pos);
                for r in 0..bs {
                    for c in 0..bs {
                        d[i * bs + r][j as usize * bs + c] += blk[r * bs + c];
                    }
                }
            }
        }
        d
    }
}

impl LinearOperator for BlockCsr {
    fn dim(&self) -> usize {
        self.pattern.nrows() * self.bs
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        match bs {
            1 => {
                for (i, yi) in y.iter_mut().enumerate().take(self.pattern.nrows()) {
                    let (range, cols) = self.pattern.row(i);
                    let mut s = 0.0;
                    for (v, &j) in self.values[range].iter().zip(cols) {
                        s += v * x[j as usize];
                    }
                    *yi = s;
                }
            }
            _ => {
                for i in 0..self.pattern.nrows() {
                    let (range, cols) = self.pattern.row(i);
                    let mut acc = [0.0; 3];
                    for (pos, &j) in range.zip(cols) {
                        let blk = self.block(pos);
                        let xj = &x[j as usize * bs..(j as usize + 1) * bs];
                        for r in 0..bs {
                            let row = &blk[r * bs..(r + 1) * bs];
                            acc[r] += row.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    y[i * bs..(i + 1) * bs].copy_from_slice(&acc[..bs]);
                }
            }
        }
    }
}

/// Block Jacobi preconditioner.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    bs: usize,
    inv: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(a: &BlockCsr) -> Self {
        BlockJacobi {
            bs: a.block_size(),
            inv: a.inverse_diagonal_blocks(),
        }
    }
}

impl LinearOperator for BlockJacobi {
    fn dim(&self) -> usize {
        self.inv.len() / self.bs
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        for (i, (yi, xi)) in y.chunks_exact_mut(bs).zip(x.chunks_exact(bs)).enumerate() {
            let inv = &self.inv[i * bs * bs..(i + 1) * bs * bs];
            for r in 0..bs {
                yi[r] = (0..bs).map(|c| inv[r * bs + c] * xi[c]).sum();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for `a x = b`, starting from the given `x`.
///
/// Stops once `|b - a x| <= rtol |b|`.
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = b.len();
    let bnorm = norm_slice(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(CgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm_slice(&r) / bnorm;
    if res <= rtol {
        return Ok(CgStats {
            iterations: 0,
            relative_residual: res,
        });
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot_slices(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot_slices(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolver {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm_slice(&r) / bnorm;
        if res <= rtol {
            return Ok(CgStats {
                iterations: it,
                relative_residual: res,
            });
        }
        m.apply(&r, &mut z);
        let rz_new = dot_slices(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: res,
    })
}

/// Dense Cholesky factorization of a small symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    pub fn new(a: &[Vec<f64>]) -> Option<Self> {
        let n = a.len();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j][j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(DenseCholesky { n, l })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> BlockCsr {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i as u32];
                if i > 0 {
                    r.push(i as u32 - 1);
                }
                if i + 1 < n {
                    r.push(i as u32 + 1);
                }
                r
            })
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(n, rows));
        let mut a = BlockCsr::zeros(pattern.clone(), 1);
        for i in 0..n {
            for j in [i.wrapping_sub(1), i, i + 1] {
                if let Some(p) = pattern.position(i, j) {
                    a.block_mut(p)[0] = if i == j { 2.0 } else { -1.0 };
                }
            }
        }
        a
    }

    #[test]
    fn invert_reproduces_identity() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let (inv, det) = invert(3, &m);
        let p = mat_mul(&m, &inv);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p[i][j] - IDENTITY3[i][j]).abs() < 1e-14);
            }
        }
        assert!((det - 21.29).abs() < 1e-12);
    }

    #[test]
    fn pcg_solves_tridiagonal_system() {
        let a = laplace_1d(50);
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        let stats = pcg(&a, &BlockJacobi::new(&a), &b, &mut x, 1e-12, 200).unwrap();
        assert!(stats.iterations <= 50);
        let mut ax = vec![0.0; 50];
        a.apply(&x, &mut ax);
        for v in ax {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cholesky_matches_pcg() {
        let a = laplace_1d(8);
        let chol = DenseCholesky::new(&a.to_dense()).unwrap();
        let b: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let mut x = vec![0.0; 8];
        chol.solve(&b, &mut x);
        let mut y = vec![0.0; 8];
        pcg(&a, &IdentityOperator(8), &b, &mut y, 1e-14, 100).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn transpose_apply_matches_dense() {
        let pattern = Arc::new(SparsityPattern::from_rows(3, vec![vec![0, 2], vec![1]]));
        let mut a = BlockCsr::zeros(pattern, 1);
        a.block_mut(0)[0] = 1.0;
        a.block_mut(1)[0] = 2.0;
        a.block_mut(2)[0] = 3.0;
        let mut y = vec![0.0; 3];
        a.apply_transpose(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 3.0, 2.0]);
    }
}

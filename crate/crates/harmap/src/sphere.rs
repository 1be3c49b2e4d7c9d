//! Pointwise geometry of the unit sphere `S^{m-1}` for `m` in {2, 3}.
//!
//! Vectors are stored as `[f64; 3]`; for `m = 2` the third entry is zero.

use crate::error::{Error, Result};
use crate::la::{self, Mat3, Vec3};

/// Below this norm the closest-point projection is treated as singular.
pub const EPS_SINGULAR: f64 = 1e-10;
/// Below this length `sphere_exp` switches to its Taylor series.
pub const EXP_SERIES_THRESHOLD: f64 = 1e-8;

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    coords: Vec3,
    m: usize,
}

impl UnitVector {
    pub fn new(coords: &[f64]) -> Result<Self> {
        let m = coords.len();
        check_target_dim(m)?;
        let mut c = [0.0; 3];
        c[..m].copy_from_slice(coords);
        let n = la::norm(&c);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(n));
        }
        Ok(UnitVector { coords: c, m })
    }

    pub(crate) fn from_padded(coords: Vec3, m: usize) -> Self {
        UnitVector { coords, m }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.m]
    }

    pub fn padded(&self) -> Vec3 {
        self.coords
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    vec: Vec3,
}

impl TangentVector {
    pub fn new(base: UnitVector, vec: &[f64]) -> Result<Self> {
        if vec.len() != base.m {
            return Err(Error::TargetDimension(vec.len()));
        }
        let mut v = [0.0; 3];
        v[..base.m].copy_from_slice(vec);
        let defect = la::dot(&base.coords, &v).abs();
        if defect > TANGENT_TOL * la::norm(&v).max(1.0) {
            return Err(Error::NotTangent(defect));
        }
        Ok(TangentVector { base, vec: v })
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec[..self.base.m]
    }
}

fn check_target_dim(m: usize) -> Result<()> {
    if m == 2 || m == 3 {
        Ok(())
    } else {
        Err(Error::TargetDimension(m))
    }
}

fn pad(xi: &[f64]) -> Result<Vec3> {
    check_target_dim(xi.len())?;
    let mut c = [0.0; 3];
    c[..xi.len()].copy_from_slice(xi);
    Ok(c)
}

/// `xi / |xi|` together with `|xi|`.
#[inline]
pub fn project(xi: &Vec3) -> Result<(Vec3, f64)> {
    let r = la::norm(xi);
    if !(r > EPS_SINGULAR) {
        return Err(Error::SingularProjection {
            norm: r,
            element: None,
        });
    }
    Ok((la::scale(1.0 / r, xi), r))
}

/// `dP(xi) = (I - xh xh^T) / |xi|`.
#[inline]
pub fn jacobian(xi: &Vec3) -> Result<Mat3> {
    let (xh, r) = project(xi)?;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = (id - xh[i] * xh[j]) / r;
        }
    }
    Ok(m)
}

/// `d^2 P(xi)[w, z]`.
#[inline]
pub fn second_derivative(xi: &Vec3, w: &Vec3, z: &Vec3) -> Result<Vec3> {
    let (xh, r) = project(xi)?;
    let dp = jacobian(xi)?;
    let dpw = la::mat_vec(&dp, w);
    let dpz = la::mat_vec(&dp, z);
    let (xz, xw, wdz) = (la::dot(&xh, z), la::dot(&xh, w), la::dot(w, &dpz));
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (-xz * dpw[i] - xw * dpz[i] - wdz * xh[i]) / r;
    }
    Ok(out)
}

pub fn closest_point_projection(xi: &[f64]) -> Result<UnitVector> {
    let m = xi.len();
    let (p, _) = project(&pad(xi)?)?;
    Ok(UnitVector::from_padded(p, m))
}

/// Row-major `m x m` matrix `dP(xi)`.
pub fn projection_jacobian(xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = xi.len();
    let j = jacobian(&pad(xi)?)?;
    Ok((0..m).map(|i| j[i][..m].to_vec()).collect())
}

pub fn projection_second_derivative(xi: &[f64], w: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let m = xi.len();
    let out = second_derivative(&pad(xi)?, &pad(w)?, &pad(z)?)?;
    Ok(out[..m].to_vec())
}

/// `cos|v| x + sin|v|/|v| v` on padded coordinates.
#[inline]
pub fn exp_map(x: &Vec3, v: &Vec3) -> Vec3 {
    let t = la::norm(v);
    let (c, s) = if t < EXP_SERIES_THRESHOLD {
        (1.0 - t * t / 2.0, 1.0 - t * t / 6.0)
    } else {
        (t.cos(), t.sin() / t)
    };
    [
        c * x[0] + s * v[0],
        c * x[1] + s * v[1],
        c * x[2] + s * v[2],
    ]
}

pub fn sphere_exp(v: &TangentVector) -> UnitVector {
    let y = exp_map(&v.base.coords, &v.vec);
    // the formula is unit up to rounding; renormalize the last bits away
    let n = la::norm(&y);
    UnitVector::from_padded(la::scale(1.0 / n, &y), v.base.m)
}

/// Deterministic orthonormal frame of the tangent plane at `x`.
///
/// `m = 2`: the +90 degree rotation. `m = 3`: Gram-Schmidt on the coordinate
/// axis least aligned with `x`, completed by the cross product.
#[inline]
pub fn frame(x: &Vec3, m: usize) -> [Vec3; 2] {
    if m == 2 {
        return [[-x[1], x[0], 0.0], [0.0; 3]];
    }
    let mut k = 0;
    for i in 1..3 {
        if x[i].abs() < x[k].abs() {
            k = i;
        }
    }
    let mut t1 = [0.0; 3];
    t1[k] = 1.0;
    la::axpy(&mut t1, -x[k], x);
    let t1 = la::scale(1.0 / la::norm(&t1), &t1);
    let t2 = la::cross(x, &t1);
    [t1, t2]
}

pub fn tangent_basis(x: &UnitVector) -> Vec<TangentVector> {
    let f = frame(&x.coords, x.m);
    f[..x.m - 1]
        .iter()
        .map(|t| TangentVector {
            base: *x,
            vec: *t,
        })
        .collect()
}

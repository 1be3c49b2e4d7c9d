//! Benchmark problems: boundary data, initial iterates, exact solutions and
//! reference energies.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::{self, Mat3, Vec3};
use crate::quadrature::gauss_legendre;

/// `x / |x|`.
pub fn radial_projection(x: &[f64]) -> Result<Vec<f64>> {
    let mut v = [0.0; 3];
    v[..x.len()].copy_from_slice(x);
    let n = la::norm(&v);
    if n == 0.0 {
        return Err(Error::SingularProjection {
            norm: 0.0,
            element: None,
        });
    }
    Ok(x.iter().map(|c| c / n).collect())
}

fn radial(x: &Vec3) -> Result<Vec3> {
    let n = la::norm(x);
    if n == 0.0 {
        return Err(Error::SingularProjection {
            norm: 0.0,
            element: None,
        });
    }
    Ok(la::scale(1.0 / n, x))
}

/// `eta(s) = exp(s^2 / (s^2 - 1))` with `eta(1) = 0`.
pub fn mollifier(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (s * s / (s * s - 1.0)).exp()
    }
}

/// Smooth extension of the boundary data `(x1, x2, 0) / |x|` into the square,
/// lifted to the north pole at the origin.
pub fn mollified_initial(x: &[f64]) -> [f64; 3] {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    if r >= 0.5 {
        return [x[0] / r, x[1] / r, 0.0];
    }
    let eta = mollifier(2.0 * r);
    let s = (1.0 - eta * eta).sqrt();
    [s * x[0] / r, s * x[1] / r, eta]
}

/// Stereographic projection from the north pole onto the equatorial plane,
/// as `(re, im)`.
pub fn stereographic(x: &[f64; 3]) -> Result<(f64, f64)> {
    let d = 1.0 - x[2];
    if d <= 0.0 {
        return Err(Error::SingularProjection {
            norm: d,
            element: None,
        });
    }
    Ok((x[0] / d, x[1] / d))
}

pub fn inverse_stereographic(z: (f64, f64)) -> [f64; 3] {
    let r2 = z.0 * z.0 + z.1 * z.1;
    let d = 1.0 + r2;
    [2.0 * z.0 / d, 2.0 * z.1 / d, (r2 - 1.0) / d]
}

fn complex_pow(z: (f64, f64), k: u32) -> (f64, f64) {
    let mut w = (1.0, 0.0);
    for _ in 0..k {
        w = (w.0 * z.0 - w.1 * z.1, w.0 * z.1 + w.1 * z.0);
    }
    w
}

/// `pi_st^{-1}(pi_st(x / |x|)^kappa)`, sending the pole to itself.
pub fn degree_kappa_boundary(x: &[f64; 3], kappa: u32) -> Result<[f64; 3]> {
    let y = radial(x)?;
    if kappa == 1 {
        return Ok(y);
    }
    // near the pole z^kappa overflows before the inverse map sends it back
    if 1.0 - y[2] < 1e-300 {
        return Ok([0.0, 0.0, 1.0]);
    }
    let z = stereographic(&y)?;
    let w = complex_pow(z, kappa);
    if !(w.0.is_finite() && w.1.is_finite()) {
        return Ok([0.0, 0.0, 1.0]);
    }
    let out = inverse_stereographic(w);
    Ok(la::scale(1.0 / la::norm(&out), &out))
}

/// High-frequency interior extension of `x / |x|`.
pub fn pseudo_random_initial(x: &[f64; 3]) -> [f64; 3] {
    const TOL: f64 = 1e-12;
    if x.iter().any(|c| (c.abs() - 0.5).abs() <= TOL) {
        return radial(x).expect("boundary points are nonzero");
    }
    let l1 = 1e4 * x[0] + 1e5 * x[1] + 1e6 * x[2];
    let l2 = 5e4 * x[0] + 7e5 * x[1] + 9e6 * x[2];
    let theta = FRAC_PI_2 * l1.sin();
    let phi = PI * l2.sin();
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (nodes, weights) = gauss_legendre(10);
    let rule = |a: f64, b: f64| -> f64 {
        nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| w * f(a + (b - a) * t))
            .sum::<f64>()
            * (b - a)
    };
    let whole = rule(a, b);
    let mid = 0.5 * (a + b);
    let halves = rule(a, mid) + rule(mid, b);
    if (whole - halves).abs() <= tol || depth == 0 {
        halves
    } else {
        adaptive_gauss(f, a, mid, 0.5 * tol, depth - 1) + adaptive_gauss(f, mid, b, 0.5 * tol, depth - 1)
    }
}

/// Dirichlet energy of `x / |x|` on the unit cube from its one-dimensional
/// representation `6 int (pi - 2 atan(1 / sin t)) / sin t dt` on `[pi/4, pi/2]`.
pub fn exact_energy_p2a() -> f64 {
    let f = |t: f64| (PI - 2.0 * (1.0 / t.sin()).atan()) / t.sin();
    6.0 * adaptive_gauss(&f, FRAC_PI_4, FRAC_PI_2, 1e-13, 30)
}

/// Independent value of `int_cube |x|^{-2}` through the pyramid substitution
/// `x1 = x3 s, x2 = x3 t`: `12 int_{[0,1]^2} ds dt / (1 + s^2 + t^2)`.
pub fn volume_integral_energy_p2a() -> f64 {
    let (nodes, weights) = gauss_legendre(40);
    let mut s = 0.0;
    for (a, wa) in nodes.iter().zip(&weights) {
        for (b, wb) in nodes.iter().zip(&weights) {
            s += wa * wb / (1.0 + a * a + b * b);
        }
    }
    12.0 * s
}

/// Gradient of `x / |x|` in the first `n` spatial directions, `grad[i][k]`.
fn radial_gradient(x: &Vec3, dim: usize) -> Result<(Vec3, Mat3)> {
    let (xh, r) = crate::sphere::project(x)?;
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..dim {
            let id = if i == k { 1.0 } else { 0.0 };
            g[i][k] = (id - xh[i] * xh[k]) / r;
        }
    }
    Ok((xh, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProblemId {
    /// Square into `S^2` with equatorial boundary data.
    P1,
    /// Cube into `S^2`, the hedgehog `x / |x|`.
    P2a,
    /// Square into `S^1`, the vortex `x / |x|`.
    P2b,
    /// Cube into `S^2` with degree-`kappa` boundary data.
    P3(u32),
    /// The hedgehog problem started from a high-frequency interior field.
    P2aRandom,
}

impl ProblemId {
    pub fn all() -> Vec<ProblemId> {
        let mut v = vec![ProblemId::P1, ProblemId::P2a, ProblemId::P2b];
        v.extend((2..=5).map(ProblemId::P3));
        v.push(ProblemId::P2aRandom);
        v
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemId::P1 | ProblemId::P2b => 2,
            _ => 3,
        }
    }

    pub fn target_dim(self) -> usize {
        match self {
            ProblemId::P2b => 2,
            _ => 3,
        }
    }

    /// Finest default level.
    pub fn max_level(self) -> u32 {
        match self {
            ProblemId::P3(_) => 5,
            _ if self.dim() == 2 => 8,
            _ => 6,
        }
    }

    pub fn default_eps_stop(self) -> f64 {
        match self {
            ProblemId::P3(_) | ProblemId::P2aRandom => 1e-4,
            _ => 1e-3,
        }
    }

    pub fn default_tau_factor(self) -> f64 {
        match self {
            ProblemId::P2aRandom => 1.0,
            _ => 4.0,
        }
    }

    /// Dirichlet data, extended into the domain; the origin, where the data is
    /// singular, is sent to the last unit vector.
    pub fn boundary(self, x: &Vec3) -> Result<Vec3> {
        let m = self.target_dim();
        if la::norm(x) == 0.0 {
            let mut e = [0.0; 3];
            e[m - 1] = 1.0;
            return Ok(e);
        }
        match self {
            ProblemId::P1 => radial(&[x[0], x[1], 0.0]),
            ProblemId::P2a | ProblemId::P2b | ProblemId::P2aRandom => radial(x),
            ProblemId::P3(k) => degree_kappa_boundary(x, k),
        }
    }

    /// Initial iterate before interpolation; agrees with [`Self::boundary`] on the boundary.
    pub fn initial(self, x: &Vec3) -> Result<Vec3> {
        match self {
            ProblemId::P1 => Ok(mollified_initial(x)),
            ProblemId::P2aRandom => Ok(pseudo_random_initial(x)),
            _ => self.boundary(x),
        }
    }

    /// Exact harmonic map and its gradient, when known.
    pub fn exact_solution(self, x: &Vec3) -> Option<Result<(Vec3, Mat3)>> {
        match self {
            ProblemId::P2a | ProblemId::P2b | ProblemId::P2aRandom => Some(radial_gradient(x, self.dim())),
            _ => None,
        }
    }

    /// Point where the exact solution has unbounded gradient but finite energy.
    pub fn finite_energy_singularity(self) -> Option<Vec3> {
        match self {
            ProblemId::P2a | ProblemId::P2aRandom => Some([0.0; 3]),
            _ => None,
        }
    }

    pub fn has_exact_solution(self) -> bool {
        matches!(self, ProblemId::P2a | ProblemId::P2b | ProblemId::P2aRandom)
    }

    pub fn exact_energy(self) -> Option<f64> {
        match self {
            ProblemId::P2a | ProblemId::P2aRandom => Some(exact_energy_p2a()),
            _ => None,
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemId::P1 => f.write_str("p1"),
            ProblemId::P2a => f.write_str("p2a"),
            ProblemId::P2b => f.write_str("p2b"),
            ProblemId::P3(k) => write!(f, "p3k{k}"),
            ProblemId::P2aRandom => f.write_str("p2a-random"),
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(ProblemId::P1),
            "p2a" => Ok(ProblemId::P2a),
            "p2b" => Ok(ProblemId::P2b),
            "p2a-random" => Ok(ProblemId::P2aRandom),
            _ => match s.strip_prefix("p3k").and_then(|k| k.parse::<u32>().ok()) {
                Some(k) if (1..=9).contains(&k) => Ok(ProblemId::P3(k)),
                _ => Err(Error::UnknownProblem(s.to_string())),
            },
        }
    }
}

impl TryFrom<String> for ProblemId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProblemId> for String {
    fn from(p: ProblemId) -> String {
        p.to_string()
    }
}

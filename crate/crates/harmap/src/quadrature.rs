//! Quadrature rules on reference simplices.
//!
//! Exactness 2 uses the symmetric interior 3-point / 4-point rules. Higher
//! exactness uses collapsed Gauss-Legendre product rules.

use crate::error::{Error, Result};

pub const MAX_EXACTNESS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub exactness: usize,
    /// Barycentric coordinates, `dim + 1` used entries.
    pub points: Vec<[f64; 4]>,
    /// Weights summing to the reference volume `1 / dim!`.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn reference_volume(&self) -> f64 {
        reference_volume(self.dim)
    }

    /// Integral of `f` over the reference simplex, `f` taking reference coordinates.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(&p[1..=self.dim]))
            .sum()
    }
}

pub fn reference_volume(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 0.5,
        _ => 1.0 / 6.0,
    }
}

pub fn quadrature_rule(dim: usize, exactness: usize) -> Result<QuadratureRule> {
    if !(1..=3).contains(&dim) || exactness > MAX_EXACTNESS {
        return Err(Error::Quadrature { dim, exactness });
    }
    let (points, weights) = match (dim, exactness) {
        (1, q) => {
            let (x, w) = gauss_legendre((q + 2) / 2);
            (
                x.iter().map(|&t| [1.0 - t, t, 0.0, 0.0]).collect(),
                w,
            )
        }
        (d, 0 | 1) => {
            let c = 1.0 / (d + 1) as f64;
            let mut p = [0.0; 4];
            p[..=d].fill(c);
            (vec![p], vec![reference_volume(d)])
        }
        (2, 2) => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            (
                vec![[b, a, a, 0.0], [a, b, a, 0.0], [a, a, b, 0.0]],
                vec![1.0 / 6.0; 3],
            )
        }
        (3, 2) => {
            let s5 = 5f64.sqrt();
            let (a, b) = ((5.0 - s5) / 20.0, (5.0 + 3.0 * s5) / 20.0);
            (
                vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]],
                vec![1.0 / 24.0; 4],
            )
        }
        (2, q) => collapsed_2d((q + 3) / 2),
        (_, q) => collapsed_3d((q + 4) / 2),
    };
    Ok(QuadratureRule {
        dim,
        exactness,
        points,
        weights,
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d.is_finite() {
            dp = d;
        }
        x[n - 1 - i] = 0.5 * (t + 1.0);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

fn collapsed_2d(k: usize) -> (Vec<[f64; 4]>, Vec<f64>) {
    let (x, w) = gauss_legendre(k);
    let mut pts = Vec::with_capacity(k * k);
    let mut wts = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (s, t) = (x[i], x[j]);
            let (a, b) = (s, (1.0 - s) * t);
            pts.push([1.0 - a - b, a, b, 0.0]);
            wts.push(w[i] * w[j] * (1.0 - s));
        }
    }
    (pts, wts)
}

fn collapsed_3d(k: usize) -> (Vec<[f64; 4]>, Vec<f64>) {
    let (x, w) = gauss_legendre(k);
    let mut pts = Vec::with_capacity(k * k * k);
    let mut wts = Vec::with_capacity(k * k * k);
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let (s, t, u) = (x[i], x[j], x[l]);
                let a = s;
                let b = (1.0 - s) * t;
                let c = (1.0 - s) * (1.0 - t) * u;
                pts.push([1.0 - a - b - c, a, b, c]);
                wts.push(w[i] * w[j] * w[l] * (1.0 - s).powi(2) * (1.0 - t));
            }
        }
    }
    (pts, wts)
}

/// Barycentric vertices of the `2^dim` children of the reference simplex
/// under one Freudenthal subdivision; child 0 is the corner at vertex 0.
fn freudenthal_children(dim: usize) -> Vec<[[f64; 4]; 4]> {
    // the reference simplex is {1 >= y_1 >= .. >= y_dim >= 0}
    let to_barycentric = |y: &[f64]| {
        let mut lam = [0.0; 4];
        lam[0] = 1.0 - y[0];
        for k in 1..dim {
            lam[k] = y[k - 1] - y[k];
        }
        lam[dim] = y[dim - 1];
        lam
    };
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &perms {
            for i in (0..dim).filter(|i| !p.contains(i)) {
                next.push([p.as_slice(), &[i]].concat());
            }
        }
        perms = next;
    }
    let mut out = Vec::new();
    for corner in 0..1usize << dim {
        for perm in &perms {
            let mut y = [0.0; 3];
            for (i, yi) in y.iter_mut().enumerate().take(dim) {
                *yi = ((corner >> i) & 1) as f64 * 0.5;
            }
            let mut verts = [[0.0; 4]; 4];
            verts[0] = to_barycentric(&y[..dim]);
            for (k, &axis) in perm.iter().enumerate() {
                y[axis] += 0.5;
                verts[k + 1] = to_barycentric(&y[..dim]);
            }
            let mut centre = [0.0; 3];
            for v in &verts[..=dim] {
                for i in 0..dim {
                    // y_i = sum of lam_j for j > i
                    centre[i] += v[i + 1..=dim].iter().sum::<f64>();
                }
            }
            if (1..dim).all(|i| centre[i - 1] > centre[i]) && centre[0] < (dim + 1) as f64 && centre[dim - 1] > 0.0 {
                out.push(verts);
            }
        }
    }
    out.sort_by(|a, b| b[0][0].total_cmp(&a[0][0]).then(b[1][0].total_cmp(&a[1][0])));
    out
}

/// `base` composed over a subdivision graded geometrically towards vertex
/// `corner`: `depth` times the simplex is split into `2^dim` children and
/// the one touching `corner` is split again.
pub fn graded_rule(base: &QuadratureRule, corner: usize, depth: usize) -> QuadratureRule {
    let dim = base.dim;
    let children = freudenthal_children(dim);
    let compose = |outer: &[[f64; 4]; 4], inner: &[f64; 4]| {
        let mut lam = [0.0; 4];
        for (k, &c) in inner[..=dim].iter().enumerate() {
            for j in 0..=dim {
                lam[j] += c * outer[k][j];
            }
        }
        lam
    };
    let mut identity = [[0.0; 4]; 4];
    for (k, row) in identity.iter_mut().enumerate().take(dim + 1) {
        row[k] = 1.0;
    }
    let mut pieces = Vec::new();
    let mut current = identity;
    let mut volume = 1.0;
    for _ in 0..depth {
        let child = |c: &[[f64; 4]; 4]| {
            let mut v = [[0.0; 4]; 4];
            for k in 0..=dim {
                v[k] = compose(&current, &c[k]);
            }
            v
        };
        volume /= (1usize << dim) as f64;
        for c in &children[1..] {
            pieces.push((child(c), volume));
        }
        current = child(&children[0]);
    }
    pieces.push((current, volume));
    let mut points = Vec::with_capacity(pieces.len() * base.len());
    let mut weights = Vec::with_capacity(pieces.len() * base.len());
    for (verts, vol) in &pieces {
        for (p, w) in base.points.iter().zip(&base.weights) {
            let lam = compose(verts, p);
            // vertex 0 of the construction is moved to `corner`
            let mut out = lam;
            out.swap(0, corner);
            points.push(out);
            weights.push(w * vol);
        }
    }
    QuadratureRule {
        dim,
        exactness: base.exactness,
        points,
        weights,
    }
}

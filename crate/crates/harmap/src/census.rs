//! Point singularities of three-dimensional sphere-valued fields.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::{self, Vec3};
use crate::space::CoefficientField;

/// Elements whose affine interpolant comes closer to zero than this are
/// treated as singular.
pub const SINGULAR_NORM_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    /// Barycenter of the cluster of singular elements.
    pub location: Vec3,
    pub degree: i32,
    /// Solid-angle sum before rounding.
    pub raw_degree: f64,
    pub elements: usize,
}

/// Distance from the origin to the triangle `abc`.
fn origin_triangle_distance(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // closest point on a triangle, by Voronoi regions
    let p = [0.0; 3];
    let ab = la::sub(b, a);
    let ac = la::sub(c, a);
    let ap = la::sub(&p, a);
    let d1 = la::dot(&ab, &ap);
    let d2 = la::dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return la::norm(a);
    }
    let bp = la::sub(&p, b);
    let d3 = la::dot(&ab, &bp);
    let d4 = la::dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return la::norm(b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return la::norm(&la::add(a, &la::scale(v, &ab)));
    }
    let cp = la::sub(&p, c);
    let d5 = la::dot(&ab, &cp);
    let d6 = la::dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return la::norm(c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return la::norm(&la::add(a, &la::scale(w, &ac)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return la::norm(&la::add(b, &la::scale(w, &la::sub(c, b))));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    la::norm(&la::add(a, &la::add(&la::scale(v, &ab), &la::scale(w, &ac))))
}

/// Minimum of `|sum lambda_i v_i|` over the simplex, i.e. the distance from
/// the origin to the convex hull of the vertex values.
pub fn affine_norm_minimum(v: &[Vec3; 4]) -> f64 {
    let m = [
        [v[1][0] - v[0][0], v[2][0] - v[0][0], v[3][0] - v[0][0]],
        [v[1][1] - v[0][1], v[2][1] - v[0][1], v[3][1] - v[0][1]],
        [v[1][2] - v[0][2], v[2][2] - v[0][2], v[3][2] - v[0][2]],
    ];
    let (inv, det) = la::invert(3, &m);
    if det.abs() > 1e-300 {
        let lam = la::mat_vec(&inv, &la::scale(-1.0, &v[0]));
        let l0 = 1.0 - lam[0] - lam[1] - lam[2];
        if l0 >= 0.0 && lam.iter().all(|&l| l >= 0.0) {
            return 0.0;
        }
    }
    const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
    FACES
        .iter()
        .map(|f| origin_triangle_distance(&v[f[0]], &v[f[1]], &v[f[2]]))
        .fold(f64::INFINITY, f64::min)
}

/// Signed solid angle of the spherical triangle spanned by three directions.
pub fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let a = la::scale(1.0 / la::norm(a), a);
    let b = la::scale(1.0 / la::norm(b), b);
    let c = la::scale(1.0 / la::norm(c), c);
    let num = la::dot(&a, &la::cross(&b, &c));
    let den = 1.0 + la::dot(&a, &b) + la::dot(&b, &c) + la::dot(&c, &a);
    2.0 * num.atan2(den)
}

/// Degree of the nodal values over the outward-oriented boundary surface of
/// a set of elements.
fn region_degree(field: &CoefficientField, elements: &[usize]) -> f64 {
    let space = field.space();
    const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
    let mut faces: HashMap<[u32; 3], (usize, [u32; 3])> = HashMap::new();
    for &e in elements {
        let nodes = space.element_nodes(e);
        for f in FACES {
            let tri = [nodes[f[0]], nodes[f[1]], nodes[f[2]]];
            let mut key = tri;
            key.sort_unstable();
            faces.entry(key).or_insert((0, tri)).0 += 1;
        }
    }
    let mut keys: Vec<_> = faces.iter().filter(|(_, (n, _))| *n == 1).map(|(k, (_, t))| (*k, *t)).collect();
    keys.sort_unstable();
    let total: f64 = keys
        .iter()
        .map(|(_, t)| {
            let v = |i: u32| field.values()[i as usize];
            solid_angle(&v(t[0]), &v(t[1]), &v(t[2]))
        })
        .sum();
    total / (4.0 * PI)
}

/// Clusters of elements whose interpolant nearly vanishes, each with its
/// topological degree.
pub fn singularity_census(field: &CoefficientField) -> Result<Vec<Singularity>> {
    let space = field.space();
    let mesh = space.mesh();
    if mesh.dim() != 3 || field.m() != 3 {
        return Err(Error::Dimension(mesh.dim()));
    }
    if space.order() != 1 {
        return Err(Error::Order(space.order()));
    }
    let ne = mesh.num_elements();
    let nv = space.num_nodes();
    let local = |e: usize| -> [Vec3; 4] {
        let n = space.element_nodes(e);
        [0, 1, 2, 3].map(|a| field.values()[n[a] as usize])
    };
    let flagged: Vec<bool> = (0..ne).map(|e| affine_norm_minimum(&local(e)) < SINGULAR_NORM_THRESHOLD).collect();

    let mut node_elements: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for e in 0..ne {
        for &n in space.element_nodes(e) {
            node_elements[n as usize].push(e);
        }
    }
    let neighbours = |e: usize| -> Vec<usize> {
        let mut out: Vec<usize> = space
            .element_nodes(e)
            .iter()
            .flat_map(|&n| node_elements[n as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    };

    let mut seen = vec![false; ne];
    let mut out = Vec::new();
    for start in 0..ne {
        if !flagged[start] || seen[start] {
            continue;
        }
        let mut cluster = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < cluster.len() {
            let e = cluster[head];
            head += 1;
            for f in neighbours(e) {
                if flagged[f] && !seen[f] {
                    seen[f] = true;
                    cluster.push(f);
                }
            }
        }
        // one layer of unflagged elements keeps the enclosing surface away
        // from the small values
        let mut region: Vec<usize> = cluster.iter().flat_map(|&e| neighbours(e)).collect();
        region.sort_unstable();
        region.dedup();
        let raw = region_degree(field, &region);
        let mut location = [0.0; 3];
        for &e in &cluster {
            la::axpy(&mut location, 1.0 / cluster.len() as f64, &mesh.barycenter(e));
        }
        out.push(Singularity {
            location,
            degree: raw.round() as i32,
            raw_degree: raw,
            elements: cluster.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;
    use crate::problems::ProblemId;
    use crate::space::{interpolate, lagrange_space};
    use std::sync::Arc;

    #[test]
    fn hedgehog_has_one_positive_singularity() {
        let s = lagrange_space(Arc::new(build_uniform_mesh(3, 2).unwrap()), 1).unwrap();
        let f = interpolate(&s, 3, |x| ProblemId::P2a.boundary(x)).unwrap();
        let c = singularity_census(&f).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].degree, 1);
        assert!(la::norm(&c[0].location) < 0.2);
        let g = interpolate(&s, 3, |x| Ok(la::scale(-1.0, &ProblemId::P2a.boundary(x)?))).unwrap();
        assert_eq!(singularity_census(&g).unwrap()[0].degree, -1);
    }

    #[test]
    fn constant_field_has_none() {
        let s = lagrange_space(Arc::new(build_uniform_mesh(3, 1).unwrap()), 1).unwrap();
        let f = CoefficientField::constant(s, 3, [0.0, 0.0, 1.0]).unwrap();
        assert!(singularity_census(&f).unwrap().is_empty());
    }

    #[test]
    fn norm_minimum_examples() {
        let v = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(affine_norm_minimum(&v), 0.0);
        let v = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [2.0, 0.0, 0.0]];
        assert!((affine_norm_minimum(&v) - 1.0).abs() < 1e-15);
    }
}

//! Uniform simplicial meshes of the cube `(-1/2, 1/2)^n`.
//!
//! Level 1 is the Kuhn triangulation of the `2^n` lattice cells. In 2D every
//! level is a Kuhn mesh. In 3D finer levels come from red refinement of the
//! previous level, cutting each interior octahedron along its shortest
//! diagonal, so the levels are nested and every tetrahedron still lies inside
//! one lattice cell.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::la::{invert, Mat3, Vec3};

const BOUNDARY_TOL: f64 = 1e-12;
const MAX_LEVEL: u32 = 12;

type Lattice = [u16; 3];

/// Affine map from the reference simplex onto an element.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub dim: usize,
    pub origin: Vec3,
    /// Columns are the edge vectors `x_k - x_0`.
    pub jac: Mat3,
    pub jinv: Mat3,
    pub det: f64,
}

impl Affine {
    pub fn volume(&self) -> f64 {
        let fact = if self.dim == 2 { 2.0 } else { 6.0 };
        self.det.abs() / fact
    }

    /// Physical gradient from a gradient with respect to reference coordinates.
    #[inline]
    pub fn push_gradient(&self, reference: &Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for k in 0..self.dim {
            for (i, gi) in g.iter_mut().enumerate().take(self.dim) {
                *gi += self.jinv[k][i] * reference[k];
            }
        }
        g
    }

    pub fn barycentric(&self, x: &Vec3) -> [f64; 4] {
        let d = [
            x[0] - self.origin[0],
            x[1] - self.origin[1],
            x[2] - self.origin[2],
        ];
        let mut lam = [0.0; 4];
        let mut s = 0.0;
        for k in 0..self.dim {
            let xi: f64 = (0..self.dim).map(|i| self.jinv[k][i] * d[i]).sum();
            lam[k + 1] = xi;
            s += xi;
        }
        lam[0] = 1.0 - s;
        lam
    }

    pub fn point(&self, lam: &[f64]) -> Vec3 {
        let mut x = self.origin;
        for k in 0..self.dim {
            for (i, xi) in x.iter_mut().enumerate().take(self.dim) {
                *xi += self.jac[i][k] * lam[k + 1];
            }
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    level: u32,
    vertices: Vec<Vec3>,
    elements: Vec<u32>,
    refinement_order: Vec<u32>,
    boundary: Vec<bool>,
    cell_elements: Vec<u32>,
}

/// Builds the uniform mesh of `(-1/2, 1/2)^dim` at refinement level `level`.
pub fn build_uniform_mesh(dim: usize, level: u32) -> Result<SimplicialMesh> {
    check_level(dim, level)?;
    match dim {
        2 => Ok(kuhn_2d(level)),
        _ => {
            let mut mesh = kuhn_3d_level1();
            while mesh.level < level {
                mesh = mesh.refine()?;
            }
            Ok(mesh)
        }
    }
}

/// All levels `1..=level`, coarsest first.
pub fn build_hierarchy(dim: usize, level: u32) -> Result<Vec<Arc<SimplicialMesh>>> {
    check_level(dim, level)?;
    let mut out = Vec::with_capacity(level as usize);
    let mut mesh = Arc::new(build_uniform_mesh(dim, 1)?);
    out.push(mesh.clone());
    while mesh.level < level {
        mesh = Arc::new(mesh.refine()?);
        out.push(mesh.clone());
    }
    Ok(out)
}

/// Longest edge over all elements.
pub fn element_diameter(mesh: &SimplicialMesh) -> f64 {
    let mut h: f64 = 0.0;
    for el in mesh.elements.chunks_exact(mesh.dim + 1) {
        for a in 0..el.len() {
            for b in a + 1..el.len() {
                let p = mesh.vertices[el[a] as usize];
                let q = mesh.vertices[el[b] as usize];
                h = h.max(crate::la::norm(&crate::la::sub(&p, &q)));
            }
        }
    }
    h
}

/// Element containing `x` and the barycentric coordinates of `x` in it.
pub fn locate_point(mesh: &SimplicialMesh, x: &[f64]) -> Result<(usize, [f64; 4])> {
    mesh.locate(x)
}

fn check_level(dim: usize, level: u32) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::Dimension(dim));
    }
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::Level(level));
    }
    let per_axis = (1u128 << level) + 1;
    if per_axis.pow(dim as u32) > u32::MAX as u128 {
        return Err(Error::IndexOverflow { dim, level });
    }
    Ok(())
}

fn lattice_index(c: &Lattice, m: usize) -> u32 {
    (c[0] as usize + (m + 1) * (c[1] as usize + (m + 1) * c[2] as usize)) as u32
}

fn lattice_coords(idx: u32, m: usize) -> Lattice {
    let idx = idx as usize;
    let x = idx % (m + 1);
    let y = (idx / (m + 1)) % (m + 1);
    let z = idx / ((m + 1) * (m + 1));
    [x as u16, y as u16, z as u16]
}

fn orientation(c: &[Lattice], dim: usize) -> i64 {
    let e = |k: usize, i: usize| c[k][i] as i64 - c[0][i] as i64;
    if dim == 2 {
        e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)
    } else {
        e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
            - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
            + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0))
    }
}

fn kuhn_cells(dim: usize, level: u32) -> Vec<Vec<Lattice>> {
    let m = 1usize << level;
    let perms: &[&[usize]] = if dim == 2 {
        &[&[0, 1], &[1, 0]]
    } else {
        &[
            &[0, 1, 2],
            &[0, 2, 1],
            &[1, 0, 2],
            &[1, 2, 0],
            &[2, 0, 1],
            &[2, 1, 0],
        ]
    };
    let nz = if dim == 2 { 1 } else { m };
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..m {
            for x in 0..m {
                for p in perms {
                    let mut c = [x as u16, y as u16, z as u16];
                    let mut path = vec![c];
                    for &axis in p.iter() {
                        c[axis] += 1;
                        path.push(c);
                    }
                    out.push(path);
                }
            }
        }
    }
    out
}

fn kuhn_2d(level: u32) -> SimplicialMesh {
    let m = 1usize << level;
    let mut elements = Vec::with_capacity(2 * m * m * 3);
    for mut tri in kuhn_cells(2, level) {
        if orientation(&tri, 2) < 0 {
            tri.swap(1, 2);
        }
        elements.extend(tri.iter().map(|c| lattice_index(c, m)));
    }
    SimplicialMesh::assemble(2, level, elements.clone(), elements)
}

fn kuhn_3d_level1() -> SimplicialMesh {
    let mut order = Vec::with_capacity(48 * 4);
    for mut tet in kuhn_cells(3, 1) {
        if orientation(&tet, 3) < 0 {
            tet.swap(2, 3);
        }
        order.extend(tet.iter().map(|c| lattice_index(c, 2)));
    }
    SimplicialMesh::assemble(3, 1, oriented(&order, 2), order)
}

fn oriented(order: &[u32], m: usize) -> Vec<u32> {
    let mut out = order.to_vec();
    for el in out.chunks_exact_mut(4) {
        let c: Vec<Lattice> = el.iter().map(|&v| lattice_coords(v, m)).collect();
        if orientation(&c, 3) < 0 {
            el.swap(2, 3);
        }
    }
    out
}

/// Octahedron diagonals in preference order: endpoints of the diagonal and the
/// ring of edges around it.
const DIAGONALS: [((usize, usize), (usize, usize), [(usize, usize); 4]); 3] = [
    ((0, 2), (1, 3), [(0, 1), (0, 3), (2, 3), (1, 2)]),
    ((0, 1), (2, 3), [(0, 2), (0, 3), (1, 3), (1, 2)]),
    ((0, 3), (1, 2), [(0, 1), (0, 2), (2, 3), (1, 3)]),
];

fn red_children(x: &[Lattice; 4]) -> [[Lattice; 4]; 8] {
    let v = |i: usize| -> Lattice { [x[i][0] * 2, x[i][1] * 2, x[i][2] * 2] };
    let mid = |i: usize, j: usize| -> Lattice {
        [x[i][0] + x[j][0], x[i][1] + x[j][1], x[i][2] + x[j][2]]
    };
    let dist2 = |a: Lattice, b: Lattice| -> i64 {
        (0..3)
            .map(|k| (a[k] as i64 - b[k] as i64).pow(2))
            .sum::<i64>()
    };
    let mut best = 0;
    let mut best_len = i64::MAX;
    for (k, (a, b, _)) in DIAGONALS.iter().enumerate() {
        let len = dist2(mid(a.0, a.1), mid(b.0, b.1));
        if len < best_len {
            best = k;
            best_len = len;
        }
    }
    let (a, b, ring) = DIAGONALS[best];
    let (ma, mb) = (mid(a.0, a.1), mid(b.0, b.1));
    let r = |k: usize| mid(ring[k % 4].0, ring[k % 4].1);
    [
        [v(0), mid(0, 1), mid(0, 2), mid(0, 3)],
        [mid(0, 1), v(1), mid(1, 2), mid(1, 3)],
        [mid(0, 2), mid(1, 2), v(2), mid(2, 3)],
        [mid(0, 3), mid(1, 3), mid(2, 3), v(3)],
        [ma, mb, r(0), r(1)],
        [ma, mb, r(1), r(2)],
        [ma, mb, r(2), r(3)],
        [ma, mb, r(3), r(0)],
    ]
}

impl SimplicialMesh {
    fn assemble(dim: usize, level: u32, elements: Vec<u32>, refinement_order: Vec<u32>) -> Self {
        let m = 1usize << level;
        let per_axis = m + 1;
        let nz = if dim == 2 { 1 } else { per_axis };
        let h = 1.0 / m as f64;
        let mut vertices = Vec::with_capacity(per_axis * per_axis * nz);
        for z in 0..nz {
            for y in 0..per_axis {
                for x in 0..per_axis {
                    let zc = if dim == 2 { 0.0 } else { -0.5 + z as f64 * h };
                    vertices.push([-0.5 + x as f64 * h, -0.5 + y as f64 * h, zc]);
                }
            }
        }
        let boundary = vertices
            .iter()
            .map(|v| {
                v[..dim]
                    .iter()
                    .any(|c| (c.abs() - 0.5).abs() <= BOUNDARY_TOL)
            })
            .collect();

        let nv = dim + 1;
        let per_cell = if dim == 2 { 2 } else { 6 };
        let ncells = m.pow(dim as u32);
        let mut fill = vec![0usize; ncells];
        let mut cell_elements = vec![u32::MAX; ncells * per_cell];
        for (e, el) in elements.chunks_exact(nv).enumerate() {
            let mut lo = [u16::MAX; 3];
            for &v in el {
                let c = lattice_coords(v, m);
                for k in 0..3 {
                    lo[k] = lo[k].min(c[k]);
                }
            }
            let cell = if dim == 2 {
                lo[0] as usize + m * lo[1] as usize
            } else {
                lo[0] as usize + m * (lo[1] as usize + m * lo[2] as usize)
            };
            cell_elements[cell * per_cell + fill[cell]] = e as u32;
            fill[cell] += 1;
        }
        debug_assert!(fill.iter().all(|&f| f == per_cell));

        SimplicialMesh {
            dim,
            level,
            vertices,
            elements,
            refinement_order,
            boundary,
            cell_elements,
        }
    }

    /// The next finer level. Children of element `e` are `8e..8e+8` in 3D.
    pub fn refine(&self) -> Result<SimplicialMesh> {
        check_level(self.dim, self.level + 1)?;
        if self.dim == 2 {
            return Ok(kuhn_2d(self.level + 1));
        }
        let m = 1usize << self.level;
        let fine_m = 2 * m;
        let mut order = Vec::with_capacity(self.refinement_order.len() * 8);
        for el in self.refinement_order.chunks_exact(4) {
            let x = [
                lattice_coords(el[0], m),
                lattice_coords(el[1], m),
                lattice_coords(el[2], m),
                lattice_coords(el[3], m),
            ];
            for child in red_children(&x) {
                order.extend(child.iter().map(|c| lattice_index(c, fine_m)));
            }
        }
        Ok(SimplicialMesh::assemble(
            3,
            self.level + 1,
            oriented(&order, fine_m),
            order,
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Nominal mesh size `2^-r sqrt(n)`.
    pub fn mesh_size(&self) -> f64 {
        (self.dim as f64).sqrt() / (1u64 << self.level) as f64
    }

    pub fn cells_per_axis(&self) -> usize {
        1usize << self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    /// Flat connectivity, `dim + 1` vertices per element, positively oriented.
    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> &[u32] {
        let nv = self.dim + 1;
        &self.elements[e * nv..(e + 1) * nv]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn affine(&self, e: usize) -> Affine {
        let el = self.element(e);
        let origin = self.vertices[el[0] as usize];
        let mut jac = [[0.0; 3]; 3];
        for k in 0..self.dim {
            let p = self.vertices[el[k + 1] as usize];
            for i in 0..self.dim {
                jac[i][k] = p[i] - origin[i];
            }
        }
        let (jinv, det) = invert(self.dim, &jac);
        Affine {
            dim: self.dim,
            origin,
            jac,
            jinv,
            det,
        }
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.affine(e).volume()
    }

    pub fn signed_volume(&self, e: usize) -> f64 {
        let a = self.affine(e);
        let fact = if self.dim == 2 { 2.0 } else { 6.0 };
        a.det / fact
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_volume(e)).sum()
    }

    pub fn element_diameter(&self) -> f64 {
        element_diameter(self)
    }

    pub fn barycenter(&self, e: usize) -> Vec3 {
        let el = self.element(e);
        let mut c = [0.0; 3];
        for &v in el {
            crate::la::axpy(&mut c, 1.0 / el.len() as f64, &self.vertices[v as usize]);
        }
        c
    }

    /// Elements of the lattice cell containing `x`.
    pub fn cell_candidates(&self, x: &[f64]) -> Result<&[u32]> {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(&x[..self.dim]);
        if p[..self.dim]
            .iter()
            .any(|c| !c.is_finite() || c.abs() > 0.5 + BOUNDARY_TOL)
        {
            return Err(Error::OutsideDomain(p));
        }
        let m = self.cells_per_axis();
        let idx = |c: f64| (((c + 0.5) * m as f64).floor().max(0.0) as usize).min(m - 1);
        let cell = if self.dim == 2 {
            idx(p[0]) + m * idx(p[1])
        } else {
            idx(p[0]) + m * (idx(p[1]) + m * idx(p[2]))
        };
        let per_cell = if self.dim == 2 { 2 } else { 6 };
        Ok(&self.cell_elements[cell * per_cell..(cell + 1) * per_cell])
    }

    /// Constant-time point location through the lattice cell structure.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, [f64; 4])> {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(&x[..self.dim]);
        let mut best = (usize::MAX, [0.0; 4], f64::NEG_INFINITY);
        for &e in self.cell_candidates(x)? {
            let lam = self.affine(e as usize).barycentric(&p);
            let worst = lam[..=self.dim].iter().cloned().fold(f64::INFINITY, f64::min);
            if worst > best.2 {
                best = (e as usize, lam, worst);
            }
        }
        Ok((best.0, best.1))
    }
}

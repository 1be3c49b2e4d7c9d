//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::la;
use crate::mesh::SimplicialMesh;
use crate::space::CoefficientField;

fn cell_type(dim: usize) -> u8 {
    if dim == 2 {
        5
    } else {
        10
    }
}

fn header(out: &mut String, title: &str) {
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
}

fn points(out: &mut String, coords: &[la::Vec3]) {
    let _ = writeln!(out, "POINTS {} double", coords.len());
    for p in coords {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
}

fn cells(out: &mut String, dim: usize, cells: &[Vec<u32>]) {
    let n = dim + 1;
    let _ = writeln!(out, "CELLS {} {}", cells.len(), cells.len() * (n + 1));
    for c in cells {
        out.push_str(&n.to_string());
        for v in c {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", cells.len());
    for _ in cells {
        let _ = writeln!(out, "{}", cell_type(dim));
    }
}

pub fn mesh_to_vtk(mesh: &SimplicialMesh) -> String {
    let mut out = String::new();
    header(&mut out, &format!("mesh dim={} level={}", mesh.dim(), mesh.level()));
    points(&mut out, mesh.vertices());
    let n = mesh.dim() + 1;
    let c: Vec<Vec<u32>> = mesh.elements().chunks_exact(n).map(|c| c.to_vec()).collect();
    cells(&mut out, mesh.dim(), &c);
    out
}

/// Field on its Lagrange nodes; second-order fields use the red-refined
/// sub-simplices so that every node is a vertex.
pub fn field_to_vtk(field: &CoefficientField, name: &str) -> String {
    let space = field.space();
    let dim = space.dim();
    let mut out = String::new();
    header(&mut out, &format!("{name} order={} m={}", space.order(), field.m()));
    points(&mut out, space.node_coords());
    let mut c = Vec::new();
    for e in 0..space.mesh().num_elements() {
        let nodes = space.element_nodes(e);
        for sub in space.refined_local_simplices(e) {
            c.push(sub[..=dim].iter().map(|&k| nodes[k]).collect());
        }
    }
    cells(&mut out, dim, &c);
    let _ = writeln!(out, "POINT_DATA {}", space.num_nodes());
    let _ = writeln!(out, "VECTORS {name} double");
    for v in field.values() {
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
    out.push_str("SCALARS norm double 1\nLOOKUP_TABLE default\n");
    for v in field.values() {
        let _ = writeln!(out, "{}", la::norm(v));
    }
    out
}

pub fn write_mesh_vtk(mesh: &SimplicialMesh, path: &Path) -> Result<()> {
    fs::write(path, mesh_to_vtk(mesh)).map_err(|e| Error::io(path, e))
}

pub fn write_field_vtk(field: &CoefficientField, name: &str, path: &Path) -> Result<()> {
    fs::write(path, field_to_vtk(field, name)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;
    use crate::space::lagrange_space;
    use std::sync::Arc;

    #[test]
    fn legacy_layout() {
        let mesh = Arc::new(build_uniform_mesh(2, 1).unwrap());
        let text = mesh_to_vtk(&mesh);
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 9 double") && text.contains("CELLS 8 32"));
        let s = lagrange_space(mesh, 2).unwrap();
        let f = CoefficientField::constant(s, 3, [0.0, 0.0, 1.0]).unwrap();
        let text = field_to_vtk(&f, "u");
        assert!(text.contains("POINTS 25 double") && text.contains("CELLS 32 128"));
        assert!(text.contains("POINT_DATA 25\nVECTORS u double"));
    }
}

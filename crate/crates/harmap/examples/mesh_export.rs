//! Build a uniform Kuhn mesh of the unit cube and write it as legacy VTK.
//!
//! ```text
//! cargo run --release --example mesh_export -- 3 2 cube.vtk
//! ```

use std::path::PathBuf;

use harmap::mesh::build_uniform_mesh;
use harmap::vtk::write_mesh_vtk;

fn main() -> harmap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dim: usize = args.first().map_or(3, |s| s.parse().expect("dim"));
    let level: u32 = args.get(1).map_or(2, |s| s.parse().expect("level"));
    let path = PathBuf::from(args.get(2).map_or("mesh.vtk", String::as_str));

    let mesh = build_uniform_mesh(dim, level)?;
    let boundary = mesh.boundary_flags().iter().filter(|&&b| b).count();
    println!("dim {dim}, r = {level}");
    println!("  {} vertices ({boundary} on the boundary)", mesh.num_vertices());
    println!("  {} elements, h = {:.6}", mesh.num_elements(), mesh.mesh_size());
    println!("  volume {:.12}", mesh.total_volume());
    write_mesh_vtk(&mesh, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

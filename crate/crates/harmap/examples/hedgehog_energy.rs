//! Energy of the three-dimensional hedgehog x/|x|: closed form, volume
//! integral, and the discrete energies of its interpolants.
//!
//! ```text
//! cargo run --release --example hedgehog_energy -- 4
//! ```

use harmap::energy::{dirichlet_energy, DiscretizationKind};
use harmap::mesh::build_uniform_mesh;
use harmap::problems::{exact_energy_p2a, volume_integral_energy_p2a, ProblemId};
use harmap::space::{interpolate, lagrange_space};

fn main() -> harmap::Result<()> {
    let max: u32 = std::env::args().nth(1).map_or(4, |s| s.parse().expect("level"));
    println!("closed form      {:.9}", exact_energy_p2a());
    println!("volume integral  {:.9}", volume_integral_energy_p2a());

    let p = ProblemId::P2a;
    println!("{:>2} {:>12} {:>12}", "r", "nc", "proj");
    for level in 1..=max {
        let space = lagrange_space(build_uniform_mesh(3, level)?.into(), 1)?;
        let u = interpolate(&space, 3, |x| p.boundary(x))?;
        println!(
            "{level:>2} {:>12.6} {:>12.6}",
            dirichlet_energy(&u, DiscretizationKind::Nonconforming)?,
            dirichlet_energy(&u, DiscretizationKind::Projection)?
        );
    }
    Ok(())
}

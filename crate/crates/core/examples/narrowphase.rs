//! Contact detection between two tetrahedra: separated within the margin,
//! then overlapping.

use frictional_mpm::collision::{narrowphase, DeformedPrimitive};
use frictional_mpm::math::Vec3;

/// Corner tet with legs of 0.1 m along x, y and `up * z`.
fn tet(offset: Vec3, up: f64, body: usize) -> DeformedPrimitive {
    let v = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, up)];
    let mut vertices = v.map(|x| x * 0.1 + offset);
    if up < 0.0 {
        vertices.swap(1, 2);
    }
    DeformedPrimitive::new(vertices, 0, body)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The lower tet has a horizontal top face at z = 0; the upper one a
    // horizontal bottom face at z = dz.
    let lower = tet(Vec3::zeros(), -1.0, 0);
    for dz in [0.05, 0.003, -0.004] {
        let upper = tet(Vec3::new(0.02, 0.02, dz), 1.0, 1);
        match narrowphase(&upper, &lower, 0.005)? {
            None => println!("offset {dz}: no contact"),
            Some(c) => println!(
                "offset {dz}: gap {:+.4} m, normal ({:.3}, {:.3}, {:.3}), point ({:.4}, {:.4}, {:.4})",
                c.gap, c.normal.x, c.normal.y, c.normal.z, c.x_c.x, c.x_c.y, c.x_c.z
            ),
        }
    }
    Ok(())
}

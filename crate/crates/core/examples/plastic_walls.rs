//! A box-clamp plastic cube falling between two tilted walls: it wedges and
//! deforms permanently.

use frictional_mpm::presets;
use frictional_mpm::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sim = Simulation::new(presets::plastic_walls())?;
    let block = sim.bodies().len() - 1;
    for _ in 0..200 {
        let d = sim.step()?;
        if d.step % 20 == 0 {
            let ps = &sim.bodies()[block];
            let bottom = ps.iter().map(|p| p.position.z).fold(f64::INFINITY, f64::min);
            let plastic = ps.iter().map(|p| (p.f_plastic.determinant() - 1.0).abs()).fold(0.0, f64::max);
            println!(
                "step {:3}: bottom at z = {bottom:.4}, v_z = {:+.4}, max |det Fp - 1| = {plastic:.2e}, {} contacts",
                d.step, d.com_velocity[block].z, d.n_contacts
            );
        }
    }
    Ok(())
}

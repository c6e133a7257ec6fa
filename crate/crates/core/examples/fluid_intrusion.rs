//! A block pushed into a deviatoric-eraser medium held in a fixed container.
//!
//! `cargo run --release --example fluid_intrusion -- [steps]`

use frictional_mpm::presets;
use frictional_mpm::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(40);
    let mut sim = Simulation::new(presets::fluid_intrusion())?;
    let block = sim.bodies().len() - 1;
    let medium = block - 1;
    for _ in 0..steps {
        let d = sim.step()?;
        if d.step % 5 == 0 {
            let bottom = sim.bodies()[block].iter().map(|p| p.position.z).fold(f64::INFINITY, f64::min);
            let top = sim.bodies()[medium].iter().map(|p| p.position.z).fold(f64::NEG_INFINITY, f64::max);
            println!(
                "step {:3}: block bottom {bottom:.4}, medium top {top:.4}, block v_z {:+.3}, {} contacts",
                d.step, d.com_velocity[block].z, d.n_contacts
            );
        }
    }
    Ok(())
}

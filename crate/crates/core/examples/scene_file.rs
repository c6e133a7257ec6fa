//! Writes a preset as a scene file with its meshes, loads it back and runs
//! a few steps from the file.

use frictional_mpm::presets;
use frictional_mpm::scene::{load_scene, write_scene};
use frictional_mpm::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/scene".into());
    let path = write_scene(&presets::cube_drop(), &dir)?;
    println!("{}:\n{}", path.display(), std::fs::read_to_string(&path)?);
    let mut sim = Simulation::new(load_scene(&path)?)?;
    for _ in 0..10 {
        let d = sim.step()?;
        println!("step {}: kinetic energy {:.4e} J, {} contacts", d.step, d.kinetic_energy, d.n_contacts);
    }
    Ok(())
}

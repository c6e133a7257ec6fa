//! Two blocks in contact falling onto a slab. While only the blocks touch
//! each other, contact impulses are internal and the total momentum changes
//! by exactly `dt * m * g` per step.

use frictional_mpm::presets;
use frictional_mpm::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = presets::block_stack();
    let (dt, g) = (scene.dt, scene.gravity);
    let mut sim = Simulation::new(scene)?;
    let mass: f64 = sim.bodies()[1..].iter().flatten().map(|p| p.mass).sum();
    for _ in 0..150 {
        let before = sim.momentum();
        let r = sim.step_detailed()?;
        let floor = r.contacts.iter().any(|c| c.prim_a.body == 0 || c.prim_b.body == 0);
        let d = &r.diagnostics;
        let drift = (sim.momentum() - before - g * (mass * dt)).norm() / (g.norm() * mass * dt);
        if d.step % 10 == 0 || (d.n_contacts > 0 && !floor && d.step < 10) {
            let label = if floor { "floor" } else { "blocks only" };
            println!(
                "step {:3}: {:3} contacts ({label}), residual {:.1e}, momentum drift {drift:.1e}, penetration {:.1e}",
                d.step, d.n_contacts, d.ncp_residual, d.max_penetration
            );
        }
    }
    Ok(())
}

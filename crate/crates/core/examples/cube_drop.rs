//! Drops a Neo-Hookean block onto a fixed slab and reports how often the
//! contact solver met its tolerance.
//!
//! `cargo run --release --example cube_drop -- [out_dir]`

use frictional_mpm::driver;
use frictional_mpm::presets::{self, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/cube-drop".into());
    let steps = Preset::CubeDrop.default_steps();
    let summary = driver::run(presets::cube_drop(), steps, &out, true)?;
    let active: Vec<_> = summary.diagnostics.iter().filter(|d| d.n_contacts > 0).collect();
    let converged = active.iter().filter(|d| d.converged).count();
    let worst = active.iter().map(|d| d.ncp_residual).fold(0.0, f64::max);
    let deepest = summary.diagnostics.iter().map(|d| d.max_penetration).fold(0.0, f64::max);
    println!("{} snapshots in {out}", summary.snapshots.len());
    println!("{converged}/{} contact steps converged, worst residual {worst:.2e}", active.len());
    println!("deepest penetration {deepest:.2e} m");
    Ok(())
}

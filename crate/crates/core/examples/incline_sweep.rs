//! Stick-slip transition of a block on a 30 degree incline: mean downhill
//! speed for several friction coefficients.
//!
//! `cargo run --release --example incline_sweep -- [steps]`

use frictional_mpm::driver::sweep_mu;
use frictional_mpm::presets::{incline, INCLINE_ANGLE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let scene = incline(0.0);
    let mus = [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0];
    let points = sweep_mu(&scene, &mus, steps, true)?;
    println!("tan(30 deg) = {:.3}", INCLINE_ANGLE.tan());
    for p in points {
        println!("mu = {:.1}: mean downhill speed {:+.4} m/s", p.mu, p.mean_speed);
    }
    Ok(())
}

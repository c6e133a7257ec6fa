//! Batch runs: particle snapshots, per-step diagnostics and friction sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{MpmError, Result};
use crate::math::Vec3;
use crate::scene::{Particle, SceneConfig};
use crate::sim::{Simulation, StepDiagnostics};

pub const DIAGNOSTICS_HEADER: &str = "step,time,n_contacts,admm_iters,ncp_residual,max_penetration,kinetic_energy";
pub const SNAPSHOT_HEADER: &str = "body_id,px,py,pz,vx,vy,vz,detF";

/// Snapshot CSV with one row per particle of every body.
pub fn snapshot_csv(bodies: &[Vec<Particle>]) -> String {
    let mut out = String::with_capacity(96 * bodies.iter().map(Vec::len).sum::<usize>() + 64);
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (b, ps) in bodies.iter().enumerate() {
        for p in ps {
            let (x, v) = (p.position, p.velocity);
            writeln!(out, "{b},{:e},{:e},{:e},{:e},{:e},{:e},{:e}", x.x, x.y, x.z, v.x, v.y, v.z, p.f.determinant()).unwrap();
        }
    }
    out
}

pub fn diagnostics_row(d: &StepDiagnostics) -> String {
    format!(
        "{},{:e},{},{},{:e},{:e},{:e}",
        d.step, d.time, d.n_contacts, d.admm_iters, d.ncp_residual, d.max_penetration, d.kinetic_energy
    )
}

pub fn snapshot_path(out_dir: &Path, frame: usize) -> PathBuf {
    out_dir.join(format!("frame_{frame:04}.csv"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub snapshots: Vec<PathBuf>,
    /// `None` when no step was taken.
    pub diagnostics_path: Option<PathBuf>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Runs `frames` steps, writing `frame_NNNN.csv` after each step and
/// `diagnostics.csv` at the end. With `frames = 0` only the initial state
/// is written, as `frame_0000.csv`, and no diagnostics table.
pub fn run(scene: SceneConfig, frames: usize, out_dir: impl AsRef<Path>, parallel: bool) -> Result<RunSummary> {
    let out_dir = out_dir.as_ref();
    let mut sim = Simulation::new(scene)?.with_parallel(parallel);
    fs::create_dir_all(out_dir)?;
    let mut snapshots = Vec::with_capacity(frames.max(1));
    if frames == 0 {
        let path = snapshot_path(out_dir, 0);
        fs::write(&path, snapshot_csv(sim.bodies()))?;
        snapshots.push(path);
    }
    let mut diagnostics = Vec::with_capacity(frames);
    let mut table = String::from(DIAGNOSTICS_HEADER);
    table.push('\n');
    for frame in 1..=frames {
        let d = sim.step()?;
        table.push_str(&diagnostics_row(&d));
        table.push('\n');
        let path = snapshot_path(out_dir, frame);
        fs::write(&path, snapshot_csv(sim.bodies()))?;
        snapshots.push(path);
        log::info!("frame {frame}/{frames}: {} contacts, {} iterations, residual {:.2e}", d.n_contacts, d.admm_iters, d.ncp_residual);
        diagnostics.push(d);
    }
    let diagnostics_path = if frames > 0 {
        let path = out_dir.join("diagnostics.csv");
        fs::write(&path, table)?;
        Some(path)
    } else {
        None
    };
    Ok(RunSummary { snapshots, diagnostics_path, diagnostics })
}

/// The single non-kinematic body of a scene.
fn single_dynamic_body(scene: &SceneConfig) -> Result<usize> {
    let dynamic: Vec<usize> = (0..scene.bodies.len()).filter(|&b| !scene.bodies[b].kinematic).collect();
    match dynamic[..] {
        [b] => Ok(b),
        _ => Err(MpmError::Config(format!("expected exactly one dynamic body, found {}", dynamic.len()))),
    }
}

/// Unit downhill direction of the kinematic support: gravity projected
/// onto the plane whose normal is the direction of least spread of the
/// kinematic mesh vertices.
pub fn downhill_direction(scene: &SceneConfig) -> Result<Vec3> {
    let points: Vec<Vec3> = scene
        .bodies
        .iter()
        .filter(|b| b.kinematic)
        .flat_map(|b| b.mesh.vertices.iter().map(move |v| v + b.initial_translation))
        .collect();
    if points.len() < 3 {
        return Err(MpmError::Config("no kinematic support plane".into()));
    }
    let mean: Vec3 = points.iter().sum::<Vec3>() / points.len() as f64;
    let cov: Matrix3<f64> = points.iter().map(|p| (p - mean) * (p - mean).transpose()).sum();
    let eig = cov.symmetric_eigen();
    let normal: Vec3 = eig.eigenvectors.column(eig.eigenvalues.imin()).into();
    let g = scene.gravity;
    let along = g - normal * g.dot(&normal);
    if along.norm() <= 1e-9 * g.norm().max(1e-300) {
        return Err(MpmError::Config("support plane is not inclined with respect to gravity".into()));
    }
    Ok(along.normalize())
}

/// Averages over the sweep window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedWindow {
    pub mean_speed: f64,
    /// Mean simulated time of the averaged steps, for comparison with
    /// `g sin(angle) t`.
    pub mean_time: f64,
    pub steps: usize,
}

/// Mean downhill center-of-mass speed of the single dynamic body over the
/// steps where it has at least one contact, skipping the first 10% of the
/// run.
pub fn mean_downhill_speed(scene: SceneConfig, steps: usize, parallel: bool) -> Result<SpeedWindow> {
    let body = single_dynamic_body(&scene)?;
    let downhill = downhill_direction(&scene)?;
    let mut sim = Simulation::new(scene)?.with_parallel(parallel);
    let skip = steps / 10;
    let (mut sum, mut time, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..steps {
        let r = sim.step_detailed()?;
        let d = &r.diagnostics;
        let touching = r.contacts.iter().any(|c| c.prim_a.body == body || c.prim_b.body == body);
        if d.step > skip && touching {
            sum += d.com_velocity[body].dot(&downhill);
            time += d.time;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MpmError::Config("the body never touched its support".into()));
    }
    Ok(SpeedWindow { mean_speed: sum / count as f64, mean_time: time / count as f64, steps: count })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mu: f64,
    pub mean_speed: f64,
    pub mean_time: f64,
}

/// Runs the scene once per friction coefficient; every body pair uses
/// `mu`. Independent runs execute concurrently when `parallel` is set.
pub fn sweep_mu(scene: &SceneConfig, mus: &[f64], steps: usize, parallel: bool) -> Result<Vec<SweepPoint>> {
    let one = |&mu: &f64| {
        let mut s = scene.clone();
        s.friction = mu;
        s.friction_pairs.clear();
        let w = mean_downhill_speed(s, steps, false)?;
        log::info!("mu = {mu}: mean downhill speed {:.5} m/s", w.mean_speed);
        Ok(SweepPoint { mu, mean_speed: w.mean_speed, mean_time: w.mean_time })
    };
    if parallel {
        mus.par_iter().map(one).collect()
    } else {
        mus.iter().map(one).collect()
    }
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("mu,mean_speed\n");
    for p in points {
        writeln!(out, "{},{:e}", p.mu, p.mean_speed).unwrap();
    }
    out
}

//! TOML scene files. Keys mirror [`SceneConfig`]; unknown keys are errors.
//!
//! ```toml
//! dt = 0.005
//! grid_spacing = 0.05
//! gravity = [0.0, 0.0, -9.81]
//! kernel = "quadratic_b_spline"   # or "linear"
//! transfer = "basic"              # "apic", "mls"
//! friction = 0.5
//!
//! [[friction_pair]]
//! a = 0
//! b = 1
//! mu = 0.3
//!
//! [[body]]
//! mesh = "block.mesh"             # relative to the scene file
//! law = "neo_hookean"             # "linear", "st_v_k", "corotational"
//! youngs_modulus = 1e5
//! poisson_ratio = 0.3
//! density = 1000.0
//! plasticity = { kind = "box_clamp", compression = 0.025, stretch = 0.0075 }
//! kinematic = false
//! initial_translation = [0.0, 0.0, 0.1]
//! ```
//!
//! Optional top-level keys: `grid_origin`, `rayleigh_alpha`, `rayleigh_beta`,
//! `contact_margin` (defaults to a tenth of the grid spacing), `admm_tol`,
//! `admm_max_iters`, `velocity_box = { min = [..], max = [..] }`,
//! `project_tangent`, `corotated_fixed_rotation`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    load_mesh, write_mesh, BodySpec, ElasticLaw, KernelKind, MaterialParams, Plasticity, SceneConfig, TangentOptions,
    TransferKind,
};
use crate::error::{MpmError, Result};
use crate::math::Vec3;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    dt: f64,
    grid_spacing: f64,
    #[serde(default)]
    grid_origin: [f64; 3],
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    #[serde(default = "default_kernel")]
    kernel: KernelKind,
    #[serde(default = "default_transfer")]
    transfer: TransferKind,
    #[serde(default = "default_friction")]
    friction: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    friction_pair: Vec<FrictionPairFile>,
    #[serde(default)]
    rayleigh_alpha: f64,
    #[serde(default)]
    rayleigh_beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contact_margin: Option<f64>,
    #[serde(default = "default_tol")]
    admm_tol: f64,
    #[serde(default = "default_iters")]
    admm_max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocity_box: Option<BoxFile>,
    #[serde(default)]
    project_tangent: bool,
    #[serde(default)]
    corotated_fixed_rotation: bool,
    #[serde(default)]
    body: Vec<BodyFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrictionPairFile {
    a: usize,
    b: usize,
    mu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    mesh: PathBuf,
    law: ElasticLaw,
    youngs_modulus: f64,
    poisson_ratio: f64,
    density: f64,
    #[serde(default = "default_plasticity")]
    plasticity: Plasticity,
    #[serde(default)]
    kinematic: bool,
    #[serde(default)]
    initial_velocity: [f64; 3],
    #[serde(default)]
    initial_translation: [f64; 3],
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}
fn default_kernel() -> KernelKind {
    KernelKind::QuadraticBSpline
}
fn default_transfer() -> TransferKind {
    TransferKind::Basic
}
fn default_friction() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-6
}
fn default_iters() -> usize {
    1000
}
fn default_plasticity() -> Plasticity {
    Plasticity::None
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn a3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses scene text; mesh paths resolve against `base_dir`.
pub fn scene_from_toml(text: &str, path: &Path, base_dir: &Path) -> Result<SceneConfig> {
    let file: SceneFile = toml::from_str(text).map_err(|e| MpmError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;

    let mut scene = SceneConfig::new(file.dt, file.grid_spacing);
    scene.grid_origin = v3(file.grid_origin);
    scene.gravity = v3(file.gravity);
    scene.kernel = file.kernel;
    scene.transfer = file.transfer;
    scene.friction = file.friction;
    scene.friction_pairs = file.friction_pair.iter().map(|p| (p.a, p.b, p.mu)).collect();
    scene.rayleigh_alpha = file.rayleigh_alpha;
    scene.rayleigh_beta = file.rayleigh_beta;
    if let Some(m) = file.contact_margin {
        scene.contact_margin = m;
    }
    scene.admm_tol = file.admm_tol;
    scene.admm_max_iters = file.admm_max_iters;
    scene.velocity_box = file.velocity_box.map(|b| (v3(b.min), v3(b.max)));
    scene.tangent = TangentOptions { project_spd: file.project_tangent, fixed_rotation: file.corotated_fixed_rotation };

    for b in file.body {
        let material = MaterialParams::new(b.law, b.youngs_modulus, b.poisson_ratio, b.density, b.plasticity)?;
        scene.bodies.push(BodySpec {
            mesh: load_mesh(base_dir.join(&b.mesh))?,
            material,
            kinematic: b.kinematic,
            initial_velocity: v3(b.initial_velocity),
            initial_translation: v3(b.initial_translation),
        });
    }
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    scene_from_toml(&text, path, base)
}

/// Serializes a scene; body meshes are named `body{i}.mesh`.
pub fn scene_to_toml(scene: &SceneConfig) -> String {
    let file = SceneFile {
        dt: scene.dt,
        grid_spacing: scene.grid_spacing,
        grid_origin: a3(&scene.grid_origin),
        gravity: a3(&scene.gravity),
        kernel: scene.kernel,
        transfer: scene.transfer,
        friction: scene.friction,
        friction_pair: scene.friction_pairs.iter().map(|&(a, b, mu)| FrictionPairFile { a, b, mu }).collect(),
        rayleigh_alpha: scene.rayleigh_alpha,
        rayleigh_beta: scene.rayleigh_beta,
        contact_margin: Some(scene.contact_margin),
        admm_tol: scene.admm_tol,
        admm_max_iters: scene.admm_max_iters,
        velocity_box: scene.velocity_box.map(|(lo, hi)| BoxFile { min: a3(&lo), max: a3(&hi) }),
        project_tangent: scene.tangent.project_spd,
        corotated_fixed_rotation: scene.tangent.fixed_rotation,
        body: scene
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| BodyFile {
                mesh: PathBuf::from(format!("body{i}.mesh")),
                law: b.material.law,
                youngs_modulus: b.material.youngs_modulus,
                poisson_ratio: b.material.poisson_ratio,
                density: b.material.density,
                plasticity: b.material.plasticity,
                kinematic: b.kinematic,
                initial_velocity: a3(&b.initial_velocity),
                initial_translation: a3(&b.initial_translation),
            })
            .collect(),
    };
    toml::to_string(&file).expect("scene serializes")
}

/// Writes `scene.toml` plus one mesh file per body into `dir`.
pub fn write_scene(scene: &SceneConfig, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, b) in scene.bodies.iter().enumerate() {
        write_mesh(&b.mesh, dir.join(format!("body{i}.mesh")))?;
    }
    let path = dir.join("scene.toml");
    std::fs::write(&path, scene_to_toml(scene))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::box_mesh;

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let text = "dt = 0.01\ngrid_spacing = 0.1\nbogus = 3\n";
        match scene_from_toml(text, Path::new("s.toml"), Path::new(".")) {
            Err(MpmError::Parse { line, message, .. }) => {
                assert_eq!(line, 3, "{message}");
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_dt_is_rejected() {
        let text = "dt = 0.5\ngrid_spacing = 0.1\n";
        assert!(matches!(scene_from_toml(text, Path::new("s"), Path::new(".")), Err(MpmError::Config(_))));
    }

    #[test]
    fn written_scene_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let mut scene = SceneConfig::new(0.005, 0.05);
        scene.transfer = TransferKind::Apic;
        scene.friction_pairs.push((0, 1, 0.25));
        scene.friction_pairs.push((1, 0, 0.25));
        let mat = MaterialParams::new(
            ElasticLaw::Corotational,
            2e5,
            0.25,
            800.0,
            Plasticity::BoxClamp { compression: 0.025, stretch: 0.0075 },
        )
        .unwrap();
        for (i, kinematic) in [false, true].into_iter().enumerate() {
            scene.bodies.push(BodySpec {
                mesh: box_mesh([2, 1, 1], Vec3::new(0.0, 0.0, i as f64), Vec3::new(0.2, 0.1, 0.1)),
                material: mat,
                kinematic,
                initial_velocity: Vec3::new(0.5, 0.0, -1.0),
                initial_translation: Vec3::new(0.0, 0.0, 0.1),
            });
        }
        let path = write_scene(&scene, dir.path()).unwrap();
        let back = load_scene(&path).unwrap();
        assert_eq!(back.bodies.len(), 2);
        assert_eq!(back.transfer, TransferKind::Apic);
        assert_eq!(back.friction(1, 0), 0.25);
        assert_eq!(back.contact_margin, scene.contact_margin);
        assert_eq!(back.bodies[1].mesh, scene.bodies[1].mesh);
        assert!(back.bodies[1].kinematic);
        assert_eq!(back.bodies[0].material, mat);
    }
}

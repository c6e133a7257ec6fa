//! Bodies, materials, scene configuration and particle seeding.

mod file;
mod mesh;

pub use file::{load_scene, scene_from_toml, scene_to_toml, write_scene};
pub use mesh::{box_mesh, load_mesh, signed_volume, write_mesh, TetMesh};

use serde::{Deserialize, Serialize};

use crate::error::{MpmError, Result};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticLaw {
    Linear,
    StVK,
    Corotational,
    NeoHookean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Plasticity {
    None,
    /// Keeps only the volumetric part of the elastic deformation.
    DeviatoricEraser,
    /// Clamps elastic singular values to `[1 - compression, 1 + stretch]`.
    BoxClamp { compression: f64, stretch: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub law: ElasticLaw,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub plasticity: Plasticity,
    /// Lamé shear modulus.
    pub mu: f64,
    /// Lamé first parameter.
    pub lambda: f64,
}

impl MaterialParams {
    pub fn new(law: ElasticLaw, youngs_modulus: f64, poisson_ratio: f64, density: f64, plasticity: Plasticity) -> Result<Self> {
        if !(youngs_modulus > 0.0) {
            return Err(MpmError::Config(format!("youngs_modulus must be > 0, got {youngs_modulus}")));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(MpmError::Config(format!("poisson_ratio must be in [0, 0.5), got {poisson_ratio}")));
        }
        if !(density > 0.0) {
            return Err(MpmError::Config(format!("density must be > 0, got {density}")));
        }
        if let Plasticity::BoxClamp { compression, stretch } = plasticity {
            if !(compression > 0.0 && compression < 1.0 && stretch > 0.0) {
                return Err(MpmError::Config(format!(
                    "box clamp needs 0 < compression < 1 and stretch > 0, got ({compression}, {stretch})"
                )));
            }
        }
        let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
        let lambda = youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
        Ok(Self { law, youngs_modulus, poisson_ratio, density, plasticity, mu, lambda })
    }
}

#[derive(Debug, Clone)]
pub struct BodySpec {
    pub mesh: TetMesh,
    pub material: MaterialParams,
    /// Static obstacle: seeded for contact, but owns no grid DOFs.
    pub kinematic: bool,
    pub initial_velocity: Vec3,
    pub initial_translation: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    QuadraticBSpline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    Basic,
    Apic,
    Mls,
}

/// Knobs on the tangent stiffness that trade exactness for robustness.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TangentOptions {
    /// Clamp negative eigenvalues of each particle's dP/dF block.
    pub project_spd: bool,
    /// Treat the corotational rotation as constant when differentiating.
    pub fixed_rotation: bool,
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub bodies: Vec<BodySpec>,
    pub dt: f64,
    pub grid_spacing: f64,
    pub grid_origin: Vec3,
    pub gravity: Vec3,
    pub kernel: KernelKind,
    pub transfer: TransferKind,
    /// Scene-wide friction coefficient, used for pairs without an override.
    pub friction: f64,
    /// Per-pair overrides `(body_a, body_b, mu)`, symmetric.
    pub friction_pairs: Vec<(usize, usize, f64)>,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    pub contact_margin: f64,
    pub admm_tol: f64,
    pub admm_max_iters: usize,
    /// Grid nodes outside this box carry zero velocity.
    pub velocity_box: Option<(Vec3, Vec3)>,
    pub tangent: TangentOptions,
}

impl SceneConfig {
    /// Scene with default numerics and no bodies; the contact margin
    /// follows the grid spacing.
    pub fn new(dt: f64, grid_spacing: f64) -> Self {
        Self {
            bodies: Vec::new(),
            dt,
            grid_spacing,
            grid_origin: Vec3::zeros(),
            gravity: Vec3::new(0.0, 0.0, -9.81),
            kernel: KernelKind::QuadraticBSpline,
            transfer: TransferKind::Basic,
            friction: 0.5,
            friction_pairs: Vec::new(),
            rayleigh_alpha: 0.0,
            rayleigh_beta: 0.0,
            contact_margin: 0.1 * grid_spacing,
            admm_tol: 1e-6,
            admm_max_iters: 1000,
            velocity_box: None,
            tangent: TangentOptions::default(),
        }
    }

    pub fn friction(&self, a: usize, b: usize) -> f64 {
        self.friction_pairs
            .iter()
            .find(|&&(i, j, _)| (i, j) == (a, b) || (j, i) == (a, b))
            .map(|&(_, _, mu)| mu)
            .unwrap_or(self.friction)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MpmError::Config(m));
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return bad(format!("dt must be in (0, 0.1], got {}", self.dt));
        }
        if !(self.grid_spacing > 0.0) {
            return bad(format!("grid_spacing must be > 0, got {}", self.grid_spacing));
        }
        if !(self.friction >= 0.0) {
            return bad(format!("friction must be >= 0, got {}", self.friction));
        }
        for &(a, b, mu) in &self.friction_pairs {
            if a >= self.bodies.len() || b >= self.bodies.len() {
                return bad(format!("friction pair ({a}, {b}) references a missing body"));
            }
            if !(mu >= 0.0) {
                return bad(format!("friction pair ({a}, {b}) has negative mu"));
            }
            if self.friction_pairs.iter().any(|&(i, j, m)| (i, j) == (b, a) && m != mu) {
                return bad(format!("friction pair ({a}, {b}) is not symmetric"));
            }
        }
        if !(self.contact_margin >= 0.0) {
            return bad("contact_margin must be >= 0".into());
        }
        if !(self.admm_tol > 0.0) {
            return bad("admm_tol must be > 0".into());
        }
        if self.admm_max_iters < 1 {
            return bad("admm_max_iters must be >= 1".into());
        }
        if self.rayleigh_alpha < 0.0 || self.rayleigh_beta < 0.0 {
            return bad("rayleigh coefficients must be >= 0".into());
        }
        Ok(())
    }
}

/// Lagrangian sample carrying mass, kinematics, deformation and its tet.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub mass: f64,
    /// Rest volume.
    pub volume: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Total deformation gradient, `f = f_elastic * f_plastic`.
    pub f: Mat3,
    pub f_elastic: Mat3,
    pub f_plastic: Mat3,
    /// Affine velocity matrix (APIC / MLS); zero for basic transfers.
    pub affine: Mat3,
    /// Rest-frame offsets of the tet vertices from the particle.
    pub primitive: [Vec3; 4],
    /// Whether face `i` of the primitive (opposite vertex `i`) lies on the
    /// body surface.
    pub surface: [bool; 4],
    pub body_id: usize,
}

impl Particle {
    /// Current tet vertices: position plus `F` applied to the rest offsets.
    pub fn deformed_primitive(&self) -> [Vec3; 4] {
        self.primitive.map(|o| self.position + self.f * o)
    }
}

/// One particle per tet at its barycenter, carrying that tet as primitive.
pub fn seed_particles(body: &BodySpec, body_id: usize) -> Vec<Particle> {
    let mesh = &body.mesh;
    let surface = mesh.surface_faces();
    (0..mesh.tets.len())
        .map(|t| {
            let verts = mesh.tet_vertices(t);
            let center = (verts[0] + verts[1] + verts[2] + verts[3]) / 4.0;
            let volume = mesh.tet_volume(t);
            Particle {
                mass: body.material.density * volume,
                volume,
                position: center + body.initial_translation,
                velocity: body.initial_velocity,
                f: Mat3::identity(),
                f_elastic: Mat3::identity(),
                f_plastic: Mat3::identity(),
                affine: Mat3::zeros(),
                primitive: verts.map(|v| v - center),
                surface: surface[t],
                body_id,
            }
        })
        .collect()
}

/// Seeds every body of the scene, in body order.
pub fn seed_scene(scene: &SceneConfig) -> Vec<Vec<Particle>> {
    scene.bodies.iter().enumerate().map(|(i, b)| seed_particles(b, i)).collect()
}

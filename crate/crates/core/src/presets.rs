//! Built-in desk-scale scenes.
//!
//! Material parameters, particle counts and geometry are illustrative
//! defaults chosen for quick runs, not measured values.

use std::f64::consts::PI;

use nalgebra::Rotation3;

use crate::math::{Mat3, Vec3};
use crate::scene::{box_mesh, BodySpec, ElasticLaw, MaterialParams, Plasticity, SceneConfig, TetMesh};

pub const GRID_SPACING: f64 = 0.05;
pub const DT: f64 = 4e-3;
/// Incline angle of the sliding scene, radians.
pub const INCLINE_ANGLE: f64 = PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    CubeDrop,
    BlockStack,
    Incline,
    PlasticWalls,
    FluidIntrusion,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::CubeDrop, Preset::BlockStack, Preset::Incline, Preset::PlasticWalls, Preset::FluidIntrusion];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CubeDrop => "cube-drop",
            Preset::BlockStack => "block-stack",
            Preset::Incline => "incline",
            Preset::PlasticWalls => "plastic-walls",
            Preset::FluidIntrusion => "fluid-intrusion",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::CubeDrop => "Neo-Hookean block (500 particles) dropped onto a fixed slab",
            Preset::BlockStack => "block thrown onto an offset block that falls onto a fixed slab",
            Preset::Incline => "stiff block released on a 30 degree incline",
            Preset::PlasticWalls => "box-clamp plastic cube sliding between two walls tilted 10 degrees",
            Preset::FluidIntrusion => "block dropped into a deviatoric-eraser medium inside a fixed container",
        }
    }

    /// Suggested run length in steps.
    pub fn default_steps(self) -> usize {
        match self {
            Preset::CubeDrop | Preset::Incline | Preset::PlasticWalls => 200,
            Preset::BlockStack => 150,
            Preset::FluidIntrusion => 150,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn build(self) -> SceneConfig {
        match self {
            Preset::CubeDrop => cube_drop(),
            Preset::BlockStack => block_stack(),
            Preset::Incline => incline(0.5),
            Preset::PlasticWalls => plastic_walls(),
            Preset::FluidIntrusion => fluid_intrusion(),
        }
    }
}

fn neo_hookean(youngs: f64, poisson: f64) -> MaterialParams {
    MaterialParams::new(ElasticLaw::NeoHookean, youngs, poisson, 1000.0, Plasticity::None).expect("valid preset material")
}

fn rigid_like() -> MaterialParams {
    neo_hookean(1e7, 0.3)
}

fn dynamic(mesh: TetMesh, material: MaterialParams) -> BodySpec {
    BodySpec { mesh, material, kinematic: false, initial_velocity: Vec3::zeros(), initial_translation: Vec3::zeros() }
}

fn fixed(mesh: TetMesh) -> BodySpec {
    BodySpec { mesh, material: rigid_like(), kinematic: true, initial_velocity: Vec3::zeros(), initial_translation: Vec3::zeros() }
}

/// Axis-aligned box given by its lower corner and size.
fn cuboid(cells: [usize; 3], min: [f64; 3], size: [f64; 3]) -> TetMesh {
    box_mesh(cells, Vec3::from(min), Vec3::from(size))
}

/// Horizontal slab with its top face at `z = 0`.
fn floor(half: f64, cells: usize) -> TetMesh {
    cuboid([cells, cells, 1], [-half, -half, -0.05], [2.0 * half, 2.0 * half, 0.05])
}

fn base_scene() -> SceneConfig {
    let mut s = SceneConfig::new(DT, GRID_SPACING);
    s.tangent.project_spd = true;
    s
}

/// Block of 5 x 5 x 4 hexes (500 particles) falling 2 cm onto a slab.
pub fn cube_drop() -> SceneConfig {
    let mut s = base_scene();
    s.bodies.push(fixed(floor(0.3, 3)));
    s.bodies.push(dynamic(cuboid([5, 5, 4], [-0.1, -0.1, 0.02], [0.2, 0.2, 0.16]), neo_hookean(1e5, 0.3)));
    s
}

/// Two blocks: the lower one starts 6 cm above the slab, the upper one
/// rests on it with an offset and is thrown downward.
pub fn block_stack() -> SceneConfig {
    let mut s = base_scene();
    s.bodies.push(fixed(floor(0.3, 3)));
    s.bodies.push(dynamic(cuboid([3, 3, 3], [-0.075, -0.075, 0.06], [0.15, 0.15, 0.15]), neo_hookean(1e5, 0.3)));
    let mut top = dynamic(cuboid([3, 3, 3], [-0.02, -0.04, 0.212], [0.12, 0.12, 0.12]), neo_hookean(1e5, 0.3));
    top.initial_velocity = Vec3::new(0.0, 0.0, -0.5);
    s.bodies.push(top);
    s
}

/// Rotation taking the horizontal incline frame to the world.
pub fn incline_rotation() -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::x_axis(), -INCLINE_ANGLE).matrix()
}

/// Unit downhill direction of the incline.
pub fn incline_downhill() -> Vec3 {
    incline_rotation() * Vec3::y()
}

/// A 0.16 x 0.16 x 0.12 stiff block (240 particles) released at rest just
/// above a long slab rotated by -30 degrees about the x axis.
pub fn incline(mu: f64) -> SceneConfig {
    let mut s = base_scene();
    s.friction = mu;
    let r = incline_rotation();
    let slab = cuboid([6, 30, 1], [-0.3, -0.5, -0.05], [0.6, 3.0, 0.05]).transformed(&r, &Vec3::zeros());
    s.bodies.push(fixed(slab));
    let gap = 0.5 * s.contact_margin;
    let block = cuboid([4, 4, 3], [-0.08, -0.08, gap], [0.16, 0.16, 0.12]).transformed(&r, &Vec3::zeros());
    s.bodies.push(dynamic(block, neo_hookean(1e6, 0.3)));
    s
}

/// Box-clamp plastic cube (320 particles) released between two walls that
/// open upward by 10 degrees each, above a floor.
pub fn plastic_walls() -> SceneConfig {
    let mut s = base_scene();
    s.friction = 0.3;
    s.bodies.push(fixed(floor(0.4, 4)));
    let tilt = 10f64.to_radians();
    for side in [-1.0, 1.0] {
        // Inner face at local x = 0, rotated about y so the top leans out.
        let local = if side < 0.0 {
            cuboid([1, 4, 5], [-0.05, -0.2, 0.0], [0.05, 0.4, 0.5])
        } else {
            cuboid([1, 4, 5], [0.0, -0.2, 0.0], [0.05, 0.4, 0.5])
        };
        let rot = *Rotation3::from_axis_angle(&Vec3::y_axis(), side * tilt).matrix();
        s.bodies.push(fixed(local.transformed(&rot, &Vec3::new(side * 0.06, 0.0, 0.0))));
    }
    let snow = MaterialParams::new(
        ElasticLaw::NeoHookean,
        1.4e5,
        0.2,
        400.0,
        Plasticity::BoxClamp { compression: 0.025, stretch: 0.0075 },
    )
    .expect("valid preset material");
    s.bodies.push(dynamic(cuboid([4, 4, 4], [-0.1, -0.1, 0.24], [0.2, 0.2, 0.2]), snow));
    s
}

/// Deviatoric-eraser medium (288 particles) inside a fixed container, with
/// a block (135 particles) dropped into it. Grid nodes outside the
/// container interior carry zero velocity.
pub fn fluid_intrusion() -> SceneConfig {
    let mut s = base_scene();
    s.friction = 0.3;
    let (half, height) = (0.15, 0.3);
    s.bodies.push(fixed(floor(half + 0.05, 4)));
    let wall = |min: [f64; 3], size: [f64; 3], cells: [usize; 3]| fixed(cuboid(cells, min, size));
    s.bodies.push(wall([-half - 0.05, -half, 0.0], [0.05, 2.0 * half, height], [1, 3, 3]));
    s.bodies.push(wall([half, -half, 0.0], [0.05, 2.0 * half, height], [1, 3, 3]));
    s.bodies.push(wall([-half - 0.05, -half - 0.05, 0.0], [2.0 * half + 0.1, 0.05, height], [4, 1, 3]));
    s.bodies.push(wall([-half - 0.05, half, 0.0], [2.0 * half + 0.1, 0.05, height], [4, 1, 3]));
    let medium = MaterialParams::new(ElasticLaw::NeoHookean, 2e4, 0.3, 1000.0, Plasticity::DeviatoricEraser).expect("valid preset material");
    let m = 0.0025;
    s.bodies.push(dynamic(cuboid([6, 6, 2], [-half + m, -half + m, m], [2.0 * (half - m), 2.0 * (half - m), 0.1]), medium));
    let mut block = dynamic(cuboid([3, 3, 3], [-0.05, -0.05, 0.13], [0.1, 0.1, 0.1]), neo_hookean(2e5, 0.3));
    block.initial_velocity = Vec3::new(0.0, 0.0, -1.0);
    s.bodies.push(block);
    s.velocity_box = Some((Vec3::new(-half, -half, 0.0), Vec3::new(half, half, 1.0)));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::seed_scene;

    #[test]
    fn presets_are_valid_and_desk_scale() {
        for p in Preset::ALL {
            let s = p.build();
            s.validate().unwrap();
            let bodies = seed_scene(&s);
            let dynamic: usize = bodies.iter().zip(&s.bodies).filter(|(_, b)| !b.kinematic).map(|(ps, _)| ps.len()).sum();
            assert!((100..=1000).contains(&dynamic), "{}: {dynamic} particles", p.name());
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
        assert_eq!(seed_scene(&cube_drop())[1].len(), 500);
    }

    #[test]
    fn incline_frame() {
        let n = incline_rotation() * Vec3::z();
        assert!((n - Vec3::new(0.0, 0.5, 3f64.sqrt() / 2.0)).norm() < 1e-12);
        assert!((incline_downhill() - Vec3::new(0.0, 3f64.sqrt() / 2.0, -0.5)).norm() < 1e-12);
    }
}

//! Time stepping: one implicit grid solve per object, global frictional
//! contact resolution, then transfer back to particles.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::collision::{deformed_primitives, detect, ContactPoint};
use crate::contact::{apply_impulses, build_delassus, build_jacobian, BodyView, ContactProblem};
use crate::error::Result;
use crate::implicit::{assemble, AssembleOptions, SystemMatrices};
use crate::kernels::GridGeometry;
use crate::math::Vec3;
use crate::ncp::{self, AdmmOptions, SolverResult};
use crate::scene::{seed_scene, Particle, SceneConfig};
use crate::transfers::{compute_weights, g2p, p2g, Grid, ParticleWeights};

/// Per-step record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub n_contacts: usize,
    pub admm_iters: usize,
    pub ncp_residual: f64,
    pub converged: bool,
    /// Deepest penetration among contacts detected this step (>= 0).
    pub max_penetration: f64,
    pub kinetic_energy: f64,
    pub com_velocity: Vec<Vec3>,
}

/// Diagnostics plus the contact data behind them.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub diagnostics: StepDiagnostics,
    pub contacts: Vec<ContactPoint>,
    pub problem: Option<ContactProblem>,
    pub solver: Option<SolverResult>,
}

struct BodyStep {
    grid: Grid,
    weights: Vec<ParticleWeights>,
    system: SystemMatrices,
    v_free: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    scene: SceneConfig,
    bodies: Vec<Vec<Particle>>,
    step_index: usize,
    time: f64,
    parallel: bool,
}

impl Simulation {
    pub fn new(scene: SceneConfig) -> Result<Self> {
        scene.validate()?;
        // Keep sparse factorizations single-threaded: results stay
        // bit-identical and parallelism lives at the object level.
        faer::set_global_parallelism(faer::Par::Seq);
        let bodies = seed_scene(&scene);
        Ok(Self { scene, bodies, step_index: 0, time: 0.0, parallel: true })
    }

    /// Enables or disables rayon parallelism across objects and pairs.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn bodies(&self) -> &[Vec<Particle>] {
        &self.bodies
    }

    pub fn bodies_mut(&mut self) -> &mut [Vec<Particle>] {
        &mut self.bodies
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.dynamic_particles().map(|p| 0.5 * p.mass * p.velocity.norm_squared()).sum()
    }

    /// Mass-weighted mean velocity of each body.
    pub fn com_velocities(&self) -> Vec<Vec3> {
        self.bodies
            .iter()
            .map(|ps| {
                let m: f64 = ps.iter().map(|p| p.mass).sum();
                let mv: Vec3 = ps.iter().map(|p| p.velocity * p.mass).sum();
                if m > 0.0 {
                    mv / m
                } else {
                    Vec3::zeros()
                }
            })
            .collect()
    }

    /// Total linear momentum of all dynamic particles.
    pub fn momentum(&self) -> Vec3 {
        self.dynamic_particles().map(|p| p.velocity * p.mass).sum()
    }

    fn dynamic_particles(&self) -> impl Iterator<Item = &Particle> {
        self.bodies.iter().zip(&self.scene.bodies).filter(|(_, s)| !s.kinematic).flat_map(|(ps, _)| ps.iter())
    }

    pub fn step(&mut self) -> Result<StepDiagnostics> {
        Ok(self.step_detailed()?.diagnostics)
    }

    fn prepare_body(&self, b: usize) -> Result<Option<BodyStep>> {
        let scene = &self.scene;
        let spec = &scene.bodies[b];
        let particles = &self.bodies[b];
        if spec.kinematic || particles.is_empty() {
            return Ok(None);
        }
        let mut points = Vec::with_capacity(5 * particles.len());
        for p in particles {
            points.push(p.position);
            points.extend(p.deformed_primitive());
        }
        let geometry = GridGeometry::covering(scene.grid_origin, scene.grid_spacing, &points, 2)?;
        let weights = compute_weights(particles, &geometry, scene.kernel, scene.transfer)?;
        let mut grid = Grid::new(geometry);
        p2g(particles, &weights, &mut grid, scene.transfer);
        if let Some((lo, hi)) = scene.velocity_box {
            grid.restrict_active(|x| (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]));
        }
        let opts = AssembleOptions {
            dt: scene.dt,
            rayleigh_alpha: scene.rayleigh_alpha,
            rayleigh_beta: scene.rayleigh_beta,
            gravity: scene.gravity,
            tangent: scene.tangent,
        };
        let system = assemble(particles, &weights, &mut grid, &spec.material, opts)?;
        let v_free = system.free_velocity(&grid.gather_velocity());
        Ok(Some(BodyStep { grid, weights, system, v_free }))
    }

    /// Advances one step. On error the state is left untouched.
    pub fn step_detailed(&mut self) -> Result<StepReport> {
        let n_bodies = self.bodies.len();
        let mut steps: Vec<Option<BodyStep>> = if self.parallel {
            (0..n_bodies).into_par_iter().map(|b| self.prepare_body(b)).collect::<Result<_>>()?
        } else {
            (0..n_bodies).map(|b| self.prepare_body(b)).collect::<Result<_>>()?
        };

        let prims = deformed_primitives(&self.bodies);
        let kinematic: Vec<bool> = self.scene.bodies.iter().map(|b| b.kinematic).collect();
        let contacts = detect(&prims, &kinematic, self.scene.contact_margin, self.parallel)?;

        let mut velocities: Vec<Vec<f64>> = steps.iter().map(|s| s.as_ref().map_or_else(Vec::new, |s| s.v_free.clone())).collect();
        let mut problem = None;
        let mut solver = None;
        if !contacts.is_empty() {
            let views: Vec<BodyView> = self
                .bodies
                .iter()
                .zip(&steps)
                .map(|(ps, s)| BodyView { particles: ps, grid: s.as_ref().map(|s| &s.grid) })
                .collect();
            let h = build_jacobian(&contacts, &views, self.scene.kernel)?;
            let systems: Vec<Option<&SystemMatrices>> = steps.iter().map(|s| s.as_ref().map(|s| &s.system)).collect();
            let mu = contacts.iter().map(|c| self.scene.friction(c.prim_a.body, c.prim_b.body)).collect();
            let p = build_delassus(&h, &systems, &velocities, mu);
            let opts = AdmmOptions { tol: self.scene.admm_tol, max_iters: self.scene.admm_max_iters, ..AdmmOptions::default() };
            let r = ncp::solve(&p, opts);
            let dv = apply_impulses(&h, &systems, r.lambda.as_slice());
            for (v, d) in velocities.iter_mut().zip(dv) {
                v.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
            problem = Some(p);
            solver = Some(r);
        }

        let mut bodies = self.bodies.clone();
        for (b, s) in steps.iter_mut().enumerate() {
            let Some(s) = s else { continue };
            s.grid.scatter_velocity(&velocities[b]);
            g2p(&s.grid, &mut bodies[b], &s.weights, self.scene.transfer, &self.scene.bodies[b].material, self.scene.dt)?;
        }
        self.bodies = bodies;
        self.step_index += 1;
        self.time += self.scene.dt;

        let diagnostics = StepDiagnostics {
            step: self.step_index,
            time: self.time,
            n_contacts: contacts.len(),
            admm_iters: solver.as_ref().map_or(0, |r| r.iterations),
            ncp_residual: solver.as_ref().map_or(0.0, |r| r.ncp_residual),
            converged: solver.as_ref().is_none_or(|r| r.converged),
            max_penetration: contacts.iter().map(|c| -c.gap).fold(0.0, f64::max),
            kinetic_energy: self.kinetic_energy(),
            com_velocity: self.com_velocities(),
        };
        log::debug!(
            "step {} t={:.4} contacts={} iters={} res={:.2e}",
            diagnostics.step,
            diagnostics.time,
            diagnostics.n_contacts,
            diagnostics.admm_iters,
            diagnostics.ncp_residual
        );
        Ok(StepReport { diagnostics, contacts, problem, solver })
    }
}

/// Per-contact impulse triples of a solver result.
pub fn contact_triples(v: &DVector<f64>) -> Vec<Vec3> {
    (0..v.len() / 3).map(|c| Vec3::new(v[3 * c], v[3 * c + 1], v[3 * c + 2])).collect()
}

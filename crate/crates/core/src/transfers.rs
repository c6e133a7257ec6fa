//! Particle-to-grid and grid-to-particle transfers (basic, APIC, MLS).

use crate::constitutive::plastic_project;
use crate::error::Result;
use crate::kernels::{stencil, GridGeometry};
use crate::math::{Mat3, Vec3};
use crate::scene::{KernelKind, MaterialParams, Particle, TransferKind};

/// Per-body Eulerian background grid.
#[derive(Debug, Clone)]
pub struct Grid {
    pub geometry: GridGeometry,
    pub node_mass: Vec<f64>,
    pub node_momentum: Vec<Vec3>,
    pub node_velocity: Vec<Vec3>,
    pub node_force: Vec<Vec3>,
    /// Flat node index to dense DOF-block index.
    pub active_map: Vec<Option<usize>>,
    /// Dense DOF-block index to flat node index.
    pub active_nodes: Vec<usize>,
}

impl Grid {
    pub fn new(geometry: GridGeometry) -> Self {
        let n = geometry.node_count();
        Self {
            geometry,
            node_mass: vec![0.0; n],
            node_momentum: vec![Vec3::zeros(); n],
            node_velocity: vec![Vec3::zeros(); n],
            node_force: vec![Vec3::zeros(); n],
            active_map: vec![None; n],
            active_nodes: Vec::new(),
        }
    }

    pub fn active_count(&self) -> usize {
        self.active_nodes.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.node_mass.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.node_momentum.iter().sum()
    }

    /// Drops active nodes for which `keep(position)` is false; their
    /// velocity is pinned to zero.
    pub fn restrict_active(&mut self, keep: impl Fn(&Vec3) -> bool) {
        let nodes = std::mem::take(&mut self.active_nodes);
        self.active_map.iter_mut().for_each(|e| *e = None);
        for flat in nodes {
            if keep(&self.geometry.node_position(flat)) {
                self.active_map[flat] = Some(self.active_nodes.len());
                self.active_nodes.push(flat);
            } else {
                self.node_velocity[flat] = Vec3::zeros();
            }
        }
    }

    /// Gathers active node velocities into a dense `3 n_g` vector.
    pub fn gather_velocity(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.active_count());
        for &flat in &self.active_nodes {
            out.extend_from_slice(self.node_velocity[flat].as_slice());
        }
        out
    }

    /// Writes a dense `3 n_g` vector back onto active nodes.
    pub fn scatter_velocity(&mut self, dense: &[f64]) {
        for (d, &flat) in self.active_nodes.iter().enumerate() {
            self.node_velocity[flat] = Vec3::new(dense[3 * d], dense[3 * d + 1], dense[3 * d + 2]);
        }
    }
}

/// Interpolation data of one particle for the current step.
#[derive(Debug, Clone)]
pub struct ParticleWeights {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    /// Gradients driving both the internal force and the `F` update:
    /// kernel gradients for basic/APIC, MLS reconstructions for MLS.
    pub grads: Vec<Vec3>,
    /// Vectors `b_i` with `C_p = sum_i v_i b_i^T` (APIC / MLS affine matrix).
    pub affine: Vec<Vec3>,
}

/// Computes interpolation data for every particle.
pub fn compute_weights(
    particles: &[Particle],
    geometry: &GridGeometry,
    kernel: KernelKind,
    transfer: TransferKind,
) -> Result<Vec<ParticleWeights>> {
    particles.iter().map(|p| particle_weights(&p.position, geometry, kernel, transfer)).collect()
}

pub fn particle_weights(x: &Vec3, geometry: &GridGeometry, kernel: KernelKind, transfer: TransferKind) -> Result<ParticleWeights> {
    let s = stencil(x, kernel, geometry)?;
    let h = geometry.spacing;
    // The affine moment matrix D_p is (h^2 / 4) I for quadratic B-splines.
    // For the linear kernel, D_p^{-1} w_i (x_i - x_p) equals grad w_i wherever
    // D_p is invertible, so the gradient form is used directly.
    let affine: Vec<Vec3> = match kernel {
        KernelKind::QuadraticBSpline => s
            .iter()
            .map(|(i, w, _)| (geometry.node_position(i) - x) * (4.0 * w / (h * h)))
            .collect(),
        KernelKind::Linear => s.gradients.clone(),
    };
    let grads = match transfer {
        TransferKind::Mls => affine.clone(),
        TransferKind::Basic | TransferKind::Apic => s.gradients.clone(),
    };
    Ok(ParticleWeights { nodes: s.node_indices, weights: s.weights, grads, affine })
}

/// Scatters mass and momentum, then builds velocities and the active map.
///
/// Nodes lighter than `1e-12` of the heaviest node carry no DOF.
pub fn p2g(particles: &[Particle], weights: &[ParticleWeights], grid: &mut Grid, transfer: TransferKind) {
    for (p, pw) in particles.iter().zip(weights) {
        let affine = !matches!(transfer, TransferKind::Basic);
        for (k, &i) in pw.nodes.iter().enumerate() {
            let w = pw.weights[k];
            grid.node_mass[i] += w * p.mass;
            let mut v = p.velocity;
            if affine {
                v += p.affine * (grid.geometry.node_position(i) - p.position);
            }
            grid.node_momentum[i] += v * (w * p.mass);
        }
    }

    let max_mass = grid.node_mass.iter().cloned().fold(0.0, f64::max);
    let eps = 1e-12 * max_mass;
    grid.active_nodes.clear();
    for i in 0..grid.node_mass.len() {
        if grid.node_mass[i] > eps && max_mass > 0.0 {
            grid.active_map[i] = Some(grid.active_nodes.len());
            grid.active_nodes.push(i);
            grid.node_velocity[i] = grid.node_momentum[i] / grid.node_mass[i];
        } else {
            grid.active_map[i] = None;
            grid.node_velocity[i] = Vec3::zeros();
        }
    }
}

/// Elastic nodal forces `f_i = -sum_p V_p P_p F_p^T g_ip`, where `g_ip` are
/// the transfer gradients and `F_p` the elastic deformation gradient.
///
/// `stresses[p]` is the first Piola-Kirchhoff stress of particle `p`.
pub fn internal_forces(particles: &[Particle], weights: &[ParticleWeights], stresses: &[Mat3], node_count: usize) -> Vec<Vec3> {
    let mut force = vec![Vec3::zeros(); node_count];
    for ((p, pw), stress) in particles.iter().zip(weights).zip(stresses) {
        let kirchhoff_like = stress * p.f_elastic.transpose() * p.volume;
        for (&i, g) in pw.nodes.iter().zip(&pw.grads) {
            force[i] -= kirchhoff_like * g;
        }
    }
    force
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2pReport {
    pub min_det: f64,
    pub inverted: usize,
}

/// Interpolates `v^{n+1}` back, advects positions and deformation gradients,
/// then applies plastic projection.
pub fn g2p(
    grid: &Grid,
    particles: &mut [Particle],
    weights: &[ParticleWeights],
    transfer: TransferKind,
    material: &MaterialParams,
    dt: f64,
) -> Result<G2pReport> {
    let mut report = G2pReport { min_det: f64::INFINITY, inverted: 0 };
    for (p, pw) in particles.iter_mut().zip(weights) {
        let mut v = Vec3::zeros();
        let mut grad_v = Mat3::zeros();
        let mut c = Mat3::zeros();
        for (k, &i) in pw.nodes.iter().enumerate() {
            let vi = grid.node_velocity[i];
            v += vi * pw.weights[k];
            grad_v += vi * pw.grads[k].transpose();
            c += vi * pw.affine[k].transpose();
        }
        p.velocity = v;
        p.position += v * dt;
        p.affine = match transfer {
            TransferKind::Basic => Mat3::zeros(),
            TransferKind::Apic | TransferKind::Mls => c,
        };
        let step = Mat3::identity() + grad_v * dt;
        p.f = step * p.f;
        let trial = step * p.f_elastic;
        let det = p.f.determinant();
        report.min_det = report.min_det.min(det);
        if det <= 0.0 {
            report.inverted += 1;
        }
        let update = plastic_project(&trial, &p.f_plastic, material)?;
        p.f_elastic = update.f_elastic;
        p.f_plastic = update.f_plastic;
    }
    if report.inverted > 0 {
        log::warn!("{} particles have det(F) <= 0 (min {:.3e}); reduce dt", report.inverted, report.min_det);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::piola;
    use crate::scene::{ElasticLaw, Plasticity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn particle(x: Vec3, v: Vec3, mass: f64) -> Particle {
        Particle {
            mass,
            volume: mass / 1000.0,
            position: x,
            velocity: v,
            f: Mat3::identity(),
            f_elastic: Mat3::identity(),
            f_plastic: Mat3::identity(),
            affine: Mat3::zeros(),
            primitive: [Vec3::zeros(); 4],
            surface: [true; 4],
            body_id: 0,
        }
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Particle> {
        (0..n)
            .map(|_| {
                let x = Vec3::new(rng.random(), rng.random(), rng.random()) * 0.3;
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                particle(x, v, rng.random_range(0.1..2.0))
            })
            .collect()
    }

    fn geometry(ps: &[Particle]) -> GridGeometry {
        GridGeometry::covering(Vec3::zeros(), 0.05, ps.iter().map(|p| &p.position), 2).unwrap()
    }

    fn material() -> MaterialParams {
        MaterialParams::new(ElasticLaw::StVK, 1e5, 0.3, 1000.0, Plasticity::None).unwrap()
    }

    #[test]
    fn single_particle_at_node() {
        let g = GridGeometry { origin: Vec3::zeros(), spacing: 0.1, lo: [-3; 3], dims: [8; 3] };
        let x = Vec3::new(0.2, 0.1, 0.0);
        let ps = vec![particle(x, Vec3::new(1.0, 0.0, 0.0), 2.0)];
        let w = compute_weights(&ps, &g, KernelKind::Linear, TransferKind::Basic).unwrap();
        let mut grid = Grid::new(g.clone());
        p2g(&ps, &w, &mut grid, TransferKind::Basic);
        let node = (0..g.node_count()).find(|&i| (g.node_position(i) - x).norm() < 1e-12).unwrap();
        assert!((grid.node_mass[node] - 2.0).abs() < 1e-12);
        assert!((grid.node_momentum[node] - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(grid.active_count(), 1);
    }

    #[test]
    fn p2g_conserves_mass_and_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = cloud(&mut rng, 300);
        for kernel in [KernelKind::Linear, KernelKind::QuadraticBSpline] {
            let g = geometry(&ps);
            let w = compute_weights(&ps, &g, kernel, TransferKind::Basic).unwrap();
            let mut grid = Grid::new(g);
            p2g(&ps, &w, &mut grid, TransferKind::Basic);
            let m: f64 = ps.iter().map(|p| p.mass).sum();
            let mom: Vec3 = ps.iter().map(|p| p.velocity * p.mass).sum();
            assert!((grid.total_mass() - m).abs() <= 1e-12 * m);
            assert!((grid.total_momentum() - mom).norm() <= 1e-12 * mom.norm().max(m));
        }
    }

    #[test]
    fn apic_with_zero_affine_matches_basic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = cloud(&mut rng, 50);
        let g = geometry(&ps);
        let w = compute_weights(&ps, &g, KernelKind::QuadraticBSpline, TransferKind::Apic).unwrap();
        let mut a = Grid::new(g.clone());
        let mut b = Grid::new(g);
        p2g(&ps, &w, &mut a, TransferKind::Apic);
        p2g(&ps, &w, &mut b, TransferKind::Basic);
        assert_eq!(a.node_momentum, b.node_momentum);
        assert_eq!(a.node_mass, b.node_mass);
    }

    #[test]
    fn zero_stress_gives_zero_forces_and_forces_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ps = cloud(&mut rng, 100);
        let g = geometry(&ps);
        for transfer in [TransferKind::Basic, TransferKind::Mls] {
            let w = compute_weights(&ps, &g, KernelKind::QuadraticBSpline, transfer).unwrap();
            let zero = vec![Mat3::zeros(); ps.len()];
            let f = internal_forces(&ps, &w, &zero, g.node_count());
            assert!(f.iter().all(|v| v.norm() == 0.0));

            for p in ps.iter_mut() {
                p.f_elastic = Mat3::identity() + Mat3::from_fn(|_, _| rng.random_range(-0.2..0.2));
            }
            let stresses: Vec<Mat3> = ps.iter().map(|p| piola(&p.f_elastic, &material()).unwrap()).collect();
            let f = internal_forces(&ps, &w, &stresses, g.node_count());
            let scale: f64 = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let total: Vec3 = f.iter().sum();
            assert!(total.norm() <= 1e-9 * scale, "{transfer:?}");
        }
    }

    #[test]
    fn uniaxial_stvk_forces_by_direct_evaluation() {
        let g = GridGeometry { origin: Vec3::zeros(), spacing: 0.1, lo: [-3; 3], dims: [8; 3] };
        let mut p = particle(Vec3::new(0.123, 0.047, 0.081), Vec3::zeros(), 1.0);
        p.f_elastic = Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0));
        let w = compute_weights(std::slice::from_ref(&p), &g, KernelKind::QuadraticBSpline, TransferKind::Basic).unwrap();
        let stress = piola(&p.f_elastic, &material()).unwrap();
        // StVK uniaxial: E = diag(0.105, 0, 0), S = 2 mu E + lambda tr(E) I, P = F S.
        let (mu, lambda) = (material().mu, material().lambda);
        let e = 0.5 * (1.1f64 * 1.1 - 1.0);
        let p00 = 1.1 * (2.0 * mu * e + lambda * e);
        let p11 = lambda * e;
        assert!((stress[(0, 0)] - p00).abs() < 1e-8 * p00);
        assert!((stress[(1, 1)] - p11).abs() < 1e-8 * p00);
        let f = internal_forces(std::slice::from_ref(&p), &w, &[stress], g.node_count());
        let s = stencil(&p.position, KernelKind::QuadraticBSpline, &g).unwrap();
        for (i, _, grad) in s.iter() {
            // -V diag(p00 * 1.1, p11, p11) grad
            let want = -p.volume * Vec3::new(p00 * 1.1 * grad.x, p11 * grad.y, p11 * grad.z);
            assert!((f[i] - want).norm() <= 1e-9 * p00 * p.volume * 100.0);
        }
    }

    fn run_g2p(ps: &mut [Particle], field: impl Fn(&Vec3) -> Vec3, kernel: KernelKind, transfer: TransferKind, dt: f64) {
        let g = geometry(ps);
        let w = compute_weights(ps, &g, kernel, transfer).unwrap();
        let mut grid = Grid::new(g);
        p2g(ps, &w, &mut grid, transfer);
        for i in 0..grid.node_velocity.len() {
            grid.node_velocity[i] = field(&grid.geometry.node_position(i));
        }
        g2p(&grid, ps, &w, transfer, &material(), dt).unwrap();
    }

    #[test]
    fn uniform_and_zero_grid_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = Vec3::new(0.3, -1.0, 2.0);
        for transfer in [TransferKind::Basic, TransferKind::Apic, TransferKind::Mls] {
            let mut ps = cloud(&mut rng, 40);
            let before = ps.clone();
            run_g2p(&mut ps, |_| c, KernelKind::QuadraticBSpline, transfer, 0.01);
            for (p, q) in ps.iter().zip(&before) {
                assert!((p.velocity - c).norm() < 1e-12);
                assert!((p.f - Mat3::identity()).norm() < 1e-12);
                assert!((p.position - (q.position + c * 0.01)).norm() < 1e-12);
            }
            let mut ps = before.clone();
            run_g2p(&mut ps, |_| Vec3::zeros(), KernelKind::QuadraticBSpline, transfer, 0.01);
            for (p, q) in ps.iter().zip(&before) {
                assert_eq!(p.position, q.position);
                assert_eq!(p.f, q.f);
            }
        }
    }

    #[test]
    fn linear_velocity_field_updates_f_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Mat3::new(0.3, -0.2, 0.1, 0.05, -0.4, 0.2, 0.1, 0.0, 0.25);
        let dt = 0.01;
        for transfer in [TransferKind::Basic, TransferKind::Apic, TransferKind::Mls] {
            let mut ps = cloud(&mut rng, 40);
            for p in ps.iter_mut() {
                p.f = Mat3::identity() + Mat3::from_fn(|_, _| rng.random_range(-0.1..0.1));
                p.f_elastic = p.f;
            }
            let before = ps.clone();
            run_g2p(&mut ps, |x| a * x, KernelKind::QuadraticBSpline, transfer, dt);
            for (p, q) in ps.iter().zip(&before) {
                let want = (Mat3::identity() + a * dt) * q.f;
                assert!((p.f - want).norm() <= 1e-10, "{transfer:?}");
                if transfer != TransferKind::Basic {
                    assert!((p.affine - a).norm() <= 1e-10);
                }
            }
        }
    }

    fn angular_momentum(ps: &[Particle], d: f64) -> Vec3 {
        // Particle angular momentum including the affine contribution
        // m_p * axial-like term of D_p C_p^T with D_p = d I.
        ps.iter()
            .map(|p| {
                let b = p.affine * d;
                let spin = Vec3::new(b[(2, 1)] - b[(1, 2)], b[(0, 2)] - b[(2, 0)], b[(1, 0)] - b[(0, 1)]);
                p.position.cross(&p.velocity) * p.mass + spin * p.mass
            })
            .sum()
    }

    #[test]
    fn apic_round_trip_preserves_angular_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut ps = cloud(&mut rng, 200);
        for p in ps.iter_mut() {
            p.affine = Mat3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        }
        let h = 0.05;
        let d = h * h / 4.0;
        let l0 = angular_momentum(&ps, d);

        let g = geometry(&ps);
        let w = compute_weights(&ps, &g, KernelKind::QuadraticBSpline, TransferKind::Apic).unwrap();
        let mut grid = Grid::new(g);
        p2g(&ps, &w, &mut grid, TransferKind::Apic);
        let lg: Vec3 = grid
            .active_nodes
            .iter()
            .map(|&i| grid.geometry.node_position(i).cross(&grid.node_momentum[i]))
            .sum();
        assert!((lg - l0).norm() <= 1e-8 * l0.norm());

        // Zero dt keeps positions fixed so the comparison is exact.
        g2p(&grid, &mut ps, &w, TransferKind::Apic, &material(), 0.0).unwrap();
        let l1 = angular_momentum(&ps, d);
        assert!((l1 - l0).norm() <= 1e-8 * l0.norm(), "{l0} vs {l1}");
    }
}

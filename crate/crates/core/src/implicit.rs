//! Implicit grid update: tangent stiffness, system assembly, one sparse
//! Cholesky factorization per object and per step, and admittance solves.
//!
//! The grid velocity after the step solves
//!
//! ```text
//! (M + dt D + dt^2 K) dv = dt (f_ext + f_el) - dt (D + dt K) v^n
//! ```
//!
//! which is backward Euler linearized once about the start-of-step state,
//! with `f_el` the elastic nodal force and `D = alpha M + beta K`.

use std::collections::HashMap;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};

use crate::constitutive::{piola, tangent};
use crate::error::{MpmError, Result};
use crate::math::{Mat3, Vec3};
use crate::scene::{MaterialParams, Particle, TangentOptions};
use crate::transfers::{internal_forces, Grid, ParticleWeights};

/// Symmetric block-sparse matrix over 3x3 node blocks, stored in full.
#[derive(Debug, Clone, Default)]
pub struct BlockSparse {
    pub n_blocks: usize,
    /// `((row, col), block)` sorted by `(row, col)`.
    pub blocks: Vec<((usize, usize), Mat3)>,
}

impl BlockSparse {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; 3 * self.n_blocks];
        for &((i, j), ref b) in &self.blocks {
            let xj = Vec3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2]);
            let r = b * xj;
            y[3 * i] += r.x;
            y[3 * i + 1] += r.y;
            y[3 * i + 2] += r.z;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|(_, b)| b.abs().max()).fold(0.0, f64::max)
    }

    /// Largest entry of `K - K^T`.
    pub fn asymmetry(&self) -> f64 {
        let map: HashMap<(usize, usize), &Mat3> = self.blocks.iter().map(|(k, b)| (*k, b)).collect();
        self.blocks
            .iter()
            .map(|((i, j), b)| match map.get(&(*j, *i)) {
                Some(t) => (*b - t.transpose()).abs().max(),
                None => b.abs().max(),
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AssembleOptions {
    pub dt: f64,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    pub gravity: Vec3,
    pub tangent: TangentOptions,
}

/// Per-object implicit system and its factorization.
pub struct SystemMatrices {
    pub dof_count: usize,
    pub dt: f64,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    /// Lumped mass per DOF.
    pub mass: Vec<f64>,
    /// Tangent stiffness, symmetrized.
    pub stiffness: BlockSparse,
    /// Right-hand side `b`.
    pub rhs: Vec<f64>,
    /// Diagonal shift that made the factorization succeed.
    pub shift: f64,
    pub factorization_seconds: f64,
    factor: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for SystemMatrices {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemMatrices")
            .field("dof_count", &self.dof_count)
            .field("shift", &self.shift)
            .field("factorized", &self.factor.is_some())
            .finish()
    }
}

/// Stiffness `K = -(1/dt) d f_el / d v`, with `F` advanced by the grid
/// velocity as in G2P. Only active nodes contribute.
pub fn stiffness(
    particles: &[Particle],
    weights: &[ParticleWeights],
    grid: &Grid,
    material: &MaterialParams,
    opts: TangentOptions,
) -> Result<BlockSparse> {
    let mut acc: HashMap<(usize, usize), Mat3> = HashMap::new();
    let mut dense = Vec::with_capacity(27);
    let mut q = Vec::with_capacity(27);
    for (p, pw) in particles.iter().zip(weights) {
        let c = tangent(&p.f_elastic, material, opts)?;
        let ft = p.f_elastic.transpose();
        dense.clear();
        q.clear();
        for (&i, g) in pw.nodes.iter().zip(&pw.grads) {
            if let Some(d) = grid.active_map[i] {
                dense.push(d);
                q.push(ft * g);
            }
        }
        // t[i][(a, b, delta)] = sum_beta C[(a beta), (b delta)] q_i[beta]
        let t: Vec<[f64; 27]> = q
            .iter()
            .map(|qi| {
                let mut t = [0.0; 27];
                for a in 0..3 {
                    for b in 0..3 {
                        for delta in 0..3 {
                            t[9 * a + 3 * b + delta] = (0..3).map(|beta| c[(3 * a + beta, 3 * b + delta)] * qi[beta]).sum();
                        }
                    }
                }
                t
            })
            .collect();
        for (ii, &di) in dense.iter().enumerate() {
            for (jj, &dj) in dense.iter().enumerate() {
                let qj = &q[jj];
                let ti = &t[ii];
                let block = Mat3::from_fn(|a, b| {
                    p.volume * (ti[9 * a + 3 * b] * qj[0] + ti[9 * a + 3 * b + 1] * qj[1] + ti[9 * a + 3 * b + 2] * qj[2])
                });
                *acc.entry((di, dj)).or_insert_with(Mat3::zeros) += block;
            }
        }
    }
    let mut blocks: Vec<((usize, usize), Mat3)> = acc
        .iter()
        .map(|(&(i, j), b)| {
            let sym = match acc.get(&(j, i)) {
                Some(t) => (b + t.transpose()) * 0.5,
                None => *b,
            };
            ((i, j), sym)
        })
        .collect();
    blocks.sort_by_key(|(k, _)| *k);
    Ok(BlockSparse { n_blocks: grid.active_count(), blocks })
}

/// Elastic nodal forces with every particle's `F_e` advanced by the dense
/// grid velocity `v` over `dt`. With `v = 0` this is the start-of-step force.
pub fn elastic_forces_at(
    particles: &[Particle],
    weights: &[ParticleWeights],
    grid: &Grid,
    material: &MaterialParams,
    v: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut stresses = Vec::with_capacity(particles.len());
    for (p, pw) in particles.iter().zip(weights) {
        let mut grad_v = Mat3::zeros();
        for (&i, g) in pw.nodes.iter().zip(&pw.grads) {
            if let Some(d) = grid.active_map[i] {
                grad_v += Vec3::new(v[3 * d], v[3 * d + 1], v[3 * d + 2]) * g.transpose();
            }
        }
        let f_hat = (Mat3::identity() + grad_v * dt) * p.f_elastic;
        stresses.push(piola(&f_hat, material)?);
    }
    let nodal = internal_forces(particles, weights, &stresses, grid.geometry.node_count());
    let mut out = vec![0.0; 3 * grid.active_count()];
    for (d, &flat) in grid.active_nodes.iter().enumerate() {
        out[3 * d..3 * d + 3].copy_from_slice(nodal[flat].as_slice());
    }
    Ok(out)
}

/// Assembles and factorizes the implicit system of one object.
///
/// Also stores the total nodal force (elastic plus gravity) in
/// `grid.node_force`.
pub fn assemble(
    particles: &[Particle],
    weights: &[ParticleWeights],
    grid: &mut Grid,
    material: &MaterialParams,
    opts: AssembleOptions,
) -> Result<SystemMatrices> {
    let n = grid.active_count();
    let dt = opts.dt;
    let mut stresses = Vec::with_capacity(particles.len());
    for p in particles {
        stresses.push(piola(&p.f_elastic, material)?);
    }
    let f_el = internal_forces(particles, weights, &stresses, grid.geometry.node_count());
    for i in 0..f_el.len() {
        grid.node_force[i] = f_el[i] + opts.gravity * grid.node_mass[i];
    }

    let k = stiffness(particles, weights, grid, material, opts.tangent)?;
    let mut mass = Vec::with_capacity(3 * n);
    let mut v_n = Vec::with_capacity(3 * n);
    let mut force = Vec::with_capacity(3 * n);
    for &flat in &grid.active_nodes {
        mass.extend_from_slice(&[grid.node_mass[flat]; 3]);
        v_n.extend_from_slice(grid.node_velocity[flat].as_slice());
        force.extend_from_slice(grid.node_force[flat].as_slice());
    }
    let kv = k.mul(&v_n);
    let rhs: Vec<f64> = (0..3 * n)
        .map(|r| {
            let damping = opts.rayleigh_alpha * mass[r] * v_n[r] + opts.rayleigh_beta * kv[r];
            dt * (force[r] - damping) - dt * dt * kv[r]
        })
        .collect();

    let mut sys = SystemMatrices {
        dof_count: 3 * n,
        dt,
        rayleigh_alpha: opts.rayleigh_alpha,
        rayleigh_beta: opts.rayleigh_beta,
        mass,
        stiffness: k,
        rhs,
        shift: 0.0,
        factorization_seconds: 0.0,
        factor: None,
    };
    sys.factorize()?;
    Ok(sys)
}

const MAX_SHIFT_ATTEMPTS: usize = 8;

impl SystemMatrices {
    /// Mass and stiffness coefficients of `A = m_coef M + k_coef K`.
    fn coefficients(&self) -> (f64, f64) {
        let dt = self.dt;
        (1.0 + dt * self.rayleigh_alpha, dt * self.rayleigh_beta + dt * dt)
    }

    /// `A x`, for checks and oracles.
    pub fn system_mul(&self, x: &[f64]) -> Vec<f64> {
        let (mc, kc) = self.coefficients();
        let kx = self.stiffness.mul(x);
        (0..self.dof_count).map(|r| (mc * self.mass[r] + self.shift) * x[r] + kc * kx[r]).collect()
    }

    /// Dense copy of `A`; only sensible for small systems.
    pub fn dense_system(&self) -> nalgebra::DMatrix<f64> {
        let (mc, kc) = self.coefficients();
        let mut a = nalgebra::DMatrix::zeros(self.dof_count, self.dof_count);
        for r in 0..self.dof_count {
            a[(r, r)] = mc * self.mass[r] + self.shift;
        }
        for &((i, j), ref b) in &self.stiffness.blocks {
            for x in 0..3 {
                for y in 0..3 {
                    a[(3 * i + x, 3 * j + y)] += kc * b[(x, y)];
                }
            }
        }
        a
    }

    fn lower_triplets(&self, shift: f64) -> Vec<Triplet<usize, usize, f64>> {
        let (mc, kc) = self.coefficients();
        let mut t = Vec::with_capacity(self.stiffness.blocks.len() * 6 + self.dof_count);
        for r in 0..self.dof_count {
            t.push(Triplet::new(r, r, mc * self.mass[r] + shift));
        }
        for &((i, j), ref b) in &self.stiffness.blocks {
            if i < j {
                continue;
            }
            for x in 0..3 {
                for y in 0..3 {
                    let (row, col) = (3 * i + x, 3 * j + y);
                    if row >= col {
                        t.push(Triplet::new(row, col, kc * b[(x, y)]));
                    }
                }
            }
        }
        t
    }

    /// Sparse Cholesky of `A`; on failure retries with a growing diagonal
    /// shift `delta * tr(A) / n`, `delta = 1e-10, 2e-10, ...`.
    fn factorize(&mut self) -> Result<()> {
        if self.dof_count == 0 {
            return Ok(());
        }
        let start = Instant::now();
        let n = self.dof_count;
        let (mc, kc) = self.coefficients();
        let kdiag: f64 = self
            .stiffness
            .blocks
            .iter()
            .filter(|((i, j), _)| i == j)
            .map(|(_, b)| b.trace())
            .sum();
        let trace = mc * self.mass.iter().sum::<f64>() + kc * kdiag;

        let mut shift = 0.0;
        let mut delta = 1e-10;
        for attempt in 0..=MAX_SHIFT_ATTEMPTS {
            let triplets = self.lower_triplets(shift);
            let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
                .map_err(|_| MpmError::FactorizationFailure { attempts: attempt })?;
            if let Ok(llt) = a.sp_cholesky(Side::Lower) {
                self.factor = Some(llt);
                self.shift = shift;
                self.factorization_seconds = start.elapsed().as_secs_f64();
                if shift > 0.0 {
                    log::warn!("implicit system needed diagonal shift {shift:.3e}");
                }
                log::debug!(
                    "factorized {} dofs in {:.4}s (shift {:.3e})",
                    n,
                    self.factorization_seconds,
                    shift
                );
                return Ok(());
            }
            shift = delta * trace / n as f64;
            delta *= 2.0;
        }
        Err(MpmError::FactorizationFailure { attempts: MAX_SHIFT_ATTEMPTS })
    }

    /// `A^{-1} rhs` using the stored factorization.
    pub fn admittance_apply(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dof_count);
        let Some(llt) = &self.factor else {
            return vec![0.0; self.dof_count];
        };
        let mut m = Mat::<f64>::from_fn(self.dof_count, 1, |i, _| rhs[i]);
        llt.solve_in_place(m.as_mut());
        (0..self.dof_count).map(|i| m[(i, 0)]).collect()
    }

    /// `A^{-1} B` for a dense multi-column right-hand side.
    pub fn admittance_apply_many(&self, rhs: &mut Mat<f64>) {
        assert_eq!(rhs.nrows(), self.dof_count);
        match &self.factor {
            Some(llt) => llt.solve_in_place(rhs.as_mut()),
            None => rhs.fill(0.0),
        }
    }

    /// `v^free = v^n + A^{-1} b`.
    pub fn free_velocity(&self, v_n: &[f64]) -> Vec<f64> {
        let dv = self.admittance_apply(&self.rhs);
        v_n.iter().zip(dv).map(|(v, d)| v + d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GridGeometry;
    use crate::scene::{ElasticLaw, KernelKind, Plasticity, TransferKind};
    use crate::transfers::{compute_weights, p2g};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn particle(x: Vec3, v: Vec3) -> Particle {
        Particle {
            mass: 0.5,
            volume: 5e-4,
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

    fn setup(ps: &[Particle], transfer: TransferKind) -> (Vec<ParticleWeights>, Grid) {
        let g = GridGeometry::covering(Vec3::zeros(), 0.1, ps.iter().map(|p| &p.position), 2).unwrap();
        let w = compute_weights(ps, &g, KernelKind::QuadraticBSpline, transfer).unwrap();
        let mut grid = Grid::new(g);
        p2g(ps, &w, &mut grid, transfer);
        (w, grid)
    }

    fn opts(dt: f64) -> AssembleOptions {
        AssembleOptions { dt, rayleigh_alpha: 0.0, rayleigh_beta: 0.0, gravity: Vec3::zeros(), tangent: TangentOptions::default() }
    }

    #[test]
    fn free_fall_is_exact() {
        let ps = vec![particle(Vec3::new(0.31, 0.22, 0.47), Vec3::new(0.0, 0.0, -1.0))];
        let (w, mut grid) = setup(&ps, TransferKind::Basic);
        let m = MaterialParams::new(ElasticLaw::NeoHookean, 1e5, 0.3, 1000.0, Plasticity::None).unwrap();
        let mut o = opts(0.01);
        o.gravity = Vec3::new(0.0, 0.0, -9.81);
        let sys = assemble(&ps, &w, &mut grid, &m, o).unwrap();
        let v = grid.gather_velocity();
        let vf = sys.free_velocity(&v);
        for d in 0..grid.active_count() {
            assert!((vf[3 * d + 2] - (-1.0 - 0.0981)).abs() < 1e-12);
            assert!(vf[3 * d].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_keeps_velocity_and_zero_damping() {
        let ps: Vec<_> = (0..8).map(|i| particle(Vec3::new(0.3 + 0.03 * (i % 2) as f64, 0.3 + 0.03 * (i / 2 % 2) as f64, 0.3 + 0.03 * (i / 4) as f64), Vec3::new(0.2, 0.0, 0.1))).collect();
        let (w, mut grid) = setup(&ps, TransferKind::Basic);
        let m = MaterialParams::new(ElasticLaw::StVK, 1e5, 0.3, 1000.0, Plasticity::None).unwrap();
        let sys = assemble(&ps, &w, &mut grid, &m, opts(0.01)).unwrap();
        assert!(sys.rhs.iter().all(|b| b.abs() < 1e-12));
        let v = grid.gather_velocity();
        let vf = sys.free_velocity(&v);
        for (a, b) in v.iter().zip(&vf) {
            assert!((a - b).abs() < 1e-12);
        }
        // alpha = beta = 0: A = M + dt^2 K exactly.
        let x: Vec<f64> = (0..sys.dof_count).map(|i| (i as f64).sin()).collect();
        let ax = sys.system_mul(&x);
        let kx = sys.stiffness.mul(&x);
        for r in 0..sys.dof_count {
            assert!((ax[r] - (sys.mass[r] * x[r] + 1e-4 * kx[r])).abs() < 1e-12 * ax[r].abs().max(1.0));
        }
    }

    #[test]
    fn soft_limit_reduces_to_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps: Vec<_> = (0..20)
            .map(|_| particle(Vec3::new(rng.random(), rng.random(), rng.random()) * 0.2, Vec3::zeros()))
            .collect();
        let (w, mut grid) = setup(&ps, TransferKind::Basic);
        let m = MaterialParams::new(ElasticLaw::Linear, 1e-30, 0.3, 1000.0, Plasticity::None).unwrap();
        let mut o = opts(0.01);
        o.gravity = Vec3::new(0.0, -9.81, 0.0);
        let sys = assemble(&ps, &w, &mut grid, &m, o).unwrap();
        let dv = sys.admittance_apply(&sys.rhs);
        for r in 0..sys.dof_count {
            assert!((dv[r] - sys.rhs[r] / sys.mass[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn admittance_round_trip_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps: Vec<_> = (0..60)
            .map(|_| particle(Vec3::new(rng.random(), rng.random(), rng.random()) * 0.3, Vec3::zeros()))
            .collect();
        for p in ps.iter_mut() {
            p.f_elastic = Mat3::identity() + Mat3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        }
        let (w, mut grid) = setup(&ps, TransferKind::Basic);
        let m = MaterialParams::new(ElasticLaw::NeoHookean, 1e6, 0.3, 1000.0, Plasticity::None).unwrap();
        let sys = assemble(&ps, &w, &mut grid, &m, opts(0.005)).unwrap();
        let x: Vec<f64> = (0..sys.dof_count).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = sys.admittance_apply(&sys.system_mul(&x));
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * x.iter().map(|a| a.abs()).fold(0.0, f64::max));
        assert_eq!(sys.admittance_apply(&sys.rhs), sys.admittance_apply(&sys.rhs));
        assert!(sys.admittance_apply(&vec![0.0; sys.dof_count]).iter().all(|v| *v == 0.0));
    }
}

//! Coulomb friction as a cone complementarity problem, solved by ADMM.
//!
//! Per contact, impulses `lambda_c = [t1, t2, n]` lie in the friction cone
//! `K = {|lambda_T| <= mu lambda_N}` and the shifted velocity
//! `sigma_c + [0, 0, mu |sigma_T|]` lies in its dual cone, orthogonal to
//! `lambda_c`. The solver minimizes `1/2 l^T G l + l^T (g + s)` over `K`
//! with the shift `s` lagged by one iteration.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use nalgebra::DVector;

use crate::contact::ContactProblem;
use crate::math::{Mat3, Vec3};

/// Euclidean projection onto `{|x_T| <= mu x_N}`.
pub fn project_cone(x: &Vec3, mu: f64) -> Vec3 {
    let r = x.x.hypot(x.y);
    let n = x.z;
    if r <= mu * n {
        return *x;
    }
    if mu * r <= -n {
        return Vec3::zeros();
    }
    let n2 = (mu * r + n) / (1.0 + mu * mu);
    let s = mu * n2 / r;
    Vec3::new(x.x * s, x.y * s, n2)
}

/// Projection onto the dual cone `{mu |y_T| <= y_N}`; for `mu = 0` this is
/// the half-space `y_N >= 0`.
pub fn project_dual_cone(y: &Vec3, mu: f64) -> Vec3 {
    if mu == 0.0 {
        return Vec3::new(y.x, y.y, y.z.max(0.0));
    }
    project_cone(y, 1.0 / mu)
}

/// De Saxce shift `[0, 0, mu |sigma_T|]`.
pub fn de_saxce(sigma: &Vec3, mu: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, mu * sigma.x.hypot(sigma.y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Iterations between penalty updates.
    pub adapt_every: usize,
    /// The penalty stays within `[rho0, rho0 * 2^k]` for this `k`.
    pub max_rho_doublings: i32,
    /// Anderson acceleration memory; 0 gives plain ADMM.
    pub anderson: usize,
    /// Block Gauss-Seidel sweeps with exact per-contact solves run on the
    /// ADMM result; 0 disables them.
    pub polish_sweeps: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iters: 1000, adapt_every: 10, max_rho_doublings: 10, anderson: 5, polish_sweeps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub lambda: DVector<f64>,
    /// `G lambda + g`.
    pub sigma: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub ncp_residual: f64,
    pub converged: bool,
    /// Residual normalization `max(|g|, |G| |lambda|, 1e-12)`.
    pub scale: f64,
}

fn triple(v: &DVector<f64>, c: usize) -> Vec3 {
    Vec3::new(v[3 * c], v[3 * c + 1], v[3 * c + 2])
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Infinity norm of a dense matrix (maximum absolute row sum).
fn mat_inf_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Normalization used by every residual of the problem at `lambda`.
pub fn residual_scale(problem: &ContactProblem, lambda: &DVector<f64>) -> f64 {
    inf_norm(&problem.free_velocity)
        .max(mat_inf_norm(&problem.delassus) * inf_norm(lambda))
        .max(1e-12)
}

/// Complementarity residual of an impulse vector: per contact, the cone
/// infeasibility of `lambda`, the dual-cone infeasibility of
/// `sigma + Gamma(sigma)` (both over `scale`) and `|lambda . (sigma +
/// Gamma)|` over `scale * |lambda|_inf`. Returns the maximum.
pub fn ncp_residual(problem: &ContactProblem, lambda: &DVector<f64>) -> f64 {
    let sigma = &problem.delassus * lambda + &problem.free_velocity;
    let g_norm = mat_inf_norm(&problem.delassus);
    residual_with(problem, lambda, &sigma, g_norm)
}

fn residual_with(problem: &ContactProblem, lambda: &DVector<f64>, sigma: &DVector<f64>, g_norm: f64) -> f64 {
    let scale = inf_norm(&problem.free_velocity).max(g_norm * inf_norm(lambda)).max(1e-12);
    let lmax = inf_norm(lambda).max(1e-300);
    let mut worst: f64 = 0.0;
    for (c, &mu) in problem.mu.iter().enumerate() {
        let l = triple(lambda, c);
        let s = triple(sigma, c);
        let shifted = s + de_saxce(&s, mu);
        let primal = (l - project_cone(&l, mu)).norm() / scale;
        let dual = (shifted - project_dual_cone(&shifted, mu)).norm() / scale;
        let comp = l.dot(&shifted).abs() / (scale * lmax);
        worst = worst.max(primal).max(dual).max(comp);
    }
    worst
}

/// Exact solution of the single-contact problem with block `w` and free
/// velocity `b`: separation, sticking, or sliding with the impulse opposite
/// to the slip. Returns `None` when no sliding root is found.
pub fn solve_single(w: &Mat3, b: &Vec3, mu: f64) -> Option<Vec3> {
    if b.z >= 0.0 {
        return Some(Vec3::zeros());
    }
    if mu == 0.0 {
        return Some(Vec3::new(0.0, 0.0, -b.z / w[(2, 2)]));
    }
    if let Some(l) = w.cholesky().map(|c| -c.solve(b)) {
        if l.z > 0.0 && l.x.hypot(l.y) <= mu * l.z {
            return Some(l);
        }
    }
    // Sliding along t = (cos phi, sin phi): lambda = lambda_N (-mu t, 1),
    // sigma_N = 0 and sigma_T parallel to t.
    let at = |phi: f64| {
        let t = Vec3::new(phi.cos(), phi.sin(), 0.0);
        let d = Vec3::new(-mu * t.x, -mu * t.y, 1.0);
        let wd = w * d;
        if wd.z <= 0.0 {
            return None;
        }
        let ln = -b.z / wd.z;
        let s = wd * ln + b;
        Some((d * ln, s.x * t.y - s.y * t.x, s.x * t.x + s.y * t.y))
    };
    const SAMPLES: usize = 256;
    let step = std::f64::consts::TAU / SAMPLES as f64;
    let mut best: Option<(Vec3, f64)> = None;
    for k in 0..SAMPLES {
        let (lo, hi) = (k as f64 * step, (k + 1) as f64 * step);
        let (Some(a), Some(c)) = (at(lo), at(hi)) else { continue };
        if a.1.signum() == c.1.signum() && a.1 != 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut f_lo) = (lo, hi, a.1);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let Some(m) = at(mid) else { break };
            if m.1 == 0.0 || (m.1 > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = m.1;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        if let Some((l, _, along)) = at(0.5 * (lo + hi)) {
            if along >= 0.0 && best.is_none_or(|(_, a)| along > a) {
                best = Some((l, along));
            }
        }
    }
    best.map(|(l, _)| l)
}

/// Block Gauss-Seidel over contacts starting from `lambda`, each block
/// solved exactly with the others held fixed.
fn polish(problem: &ContactProblem, lambda: &DVector<f64>, sweeps: usize) -> DVector<f64> {
    let big_g = &problem.delassus;
    let nc = problem.contact_count();
    let mut lambda = lambda.clone();
    let mut sigma = big_g * &lambda + &problem.free_velocity;
    let blocks: Vec<Mat3> = (0..nc).map(|c| big_g.fixed_view::<3, 3>(3 * c, 3 * c).into_owned()).collect();
    for _ in 0..sweeps {
        let mut change: f64 = 0.0;
        for c in 0..nc {
            let l = triple(&lambda, c);
            let b = triple(&sigma, c) - blocks[c] * l;
            let Some(new) = solve_single(&blocks[c], &b, problem.mu[c]) else { continue };
            let delta = new - l;
            if delta == Vec3::zeros() {
                continue;
            }
            change = change.max(delta.amax());
            lambda.fixed_rows_mut::<3>(3 * c).copy_from(&new);
            for k in 0..3 {
                sigma.axpy(delta[k], &big_g.column(3 * c + k), 1.0);
            }
        }
        if change <= 1e-15 * inf_norm(&lambda) {
            break;
        }
    }
    lambda
}

struct Factor {
    llt: Llt<f64>,
}

impl Factor {
    fn new(g: &Mat<f64>, rho: f64) -> Self {
        let n = g.nrows();
        let mut m = g.clone();
        for i in 0..n {
            m[(i, i)] += rho;
        }
        // G is PSD up to roundoff, so G + rho I is SPD for rho > 0; grow
        // the shift if roundoff says otherwise.
        let mut extra = 0.0;
        loop {
            match m.llt(Side::Lower) {
                Ok(llt) => return Self { llt },
                Err(_) => {
                    let bump = if extra == 0.0 { 1e-12 * rho.max(1e-300) } else { extra };
                    for i in 0..n {
                        m[(i, i)] += bump;
                    }
                    extra = 2.0 * bump;
                }
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.llt.solve_in_place(b.as_mut());
        DVector::from_fn(rhs.len(), |i, _| b[(i, 0)])
    }
}

/// Type-II Anderson mixing over the last `m` fixed-point steps.
struct Anderson {
    m: usize,
    prev: Option<(DVector<f64>, DVector<f64>)>,
    df: Vec<DVector<f64>>,
    dg: Vec<DVector<f64>>,
}

impl Anderson {
    fn new(m: usize) -> Self {
        Self { m, prev: None, df: Vec::new(), dg: Vec::new() }
    }

    fn enabled(&self) -> bool {
        self.m > 0
    }

    fn clear(&mut self) {
        self.prev = None;
        self.df.clear();
        self.dg.clear();
    }

    /// Records the step `w -> image` and returns the mixed next state, or
    /// `None` when there is not enough history.
    fn extrapolate(&mut self, w: &DVector<f64>, image: &DVector<f64>) -> Option<DVector<f64>> {
        if self.m == 0 {
            return None;
        }
        let f = image - w;
        if let Some((pf, pg)) = self.prev.take() {
            self.df.push(&f - pf);
            self.dg.push(image - pg);
            if self.df.len() > self.m {
                self.df.remove(0);
                self.dg.remove(0);
            }
        }
        self.prev = Some((f.clone(), image.clone()));
        let k = self.df.len();
        if k == 0 {
            return None;
        }
        let mut a = nalgebra::DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for i in 0..k {
            b[i] = self.df[i].dot(&f);
            for j in 0..=i {
                let v = self.df[i].dot(&self.df[j]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let reg = 1e-10 * a.diagonal().amax().max(1e-300);
        for i in 0..k {
            a[(i, i)] += reg;
        }
        let gamma = a.cholesky()?.solve(&b);
        let mut next = image.clone();
        for i in 0..k {
            next.axpy(-gamma[i], &self.dg[i], 1.0);
        }
        next.iter().all(|x| x.is_finite()).then_some(next)
    }
}

/// ADMM with a lagged De Saxce shift and a self-balancing penalty.
///
/// The penalty starts at `tr(G) / (3 n_c)` and is doubled or halved when
/// the primal and dual residuals drift apart by more than 10x, never below
/// its floor. When the contact velocity blows up, the iteration restarts
/// from zero with the floor doubled. Steps are Anderson-mixed, falling back
/// to the plain step whenever mixing increases the fixed-point residual.
///
/// The iterate with the smallest complementarity residual is then refined
/// by block Gauss-Seidel sweeps with exact single-contact solves, and the
/// refinement is kept unless it raises the residual above both its previous
/// value and `opts.tol`. `converged` reports whether the result meets
/// `opts.tol`.
pub fn solve(problem: &ContactProblem, opts: AdmmOptions) -> SolverResult {
    let nc = problem.contact_count();
    let n = 3 * nc;
    let g = &problem.free_velocity;
    let big_g = &problem.delassus;
    let finish = |lambda: DVector<f64>, iterations: usize, primal: f64, dual: f64, res: f64| {
        let sigma = big_g * &lambda + g;
        let scale = residual_scale(problem, &lambda);
        SolverResult {
            lambda,
            sigma,
            iterations,
            primal_residual: primal,
            dual_residual: dual,
            ncp_residual: res,
            converged: res <= opts.tol,
            scale,
        }
    };
    if nc == 0 {
        return finish(DVector::zeros(0), 0, 0.0, 0.0, 0.0);
    }

    let mut best_z = DVector::zeros(n);
    let mut best_res = ncp_residual(problem, &best_z);
    let (mut best_primal, mut best_dual) = (0.0, 0.0);
    if best_res <= opts.tol {
        return finish(best_z, 0, 0.0, 0.0, best_res);
    }

    let g_norm = mat_inf_norm(big_g);
    let g_faer = Mat::<f64>::from_fn(n, n, |i, j| big_g[(i, j)]);
    let trace = big_g.trace();
    let rho0 = if trace > 0.0 { trace / n as f64 } else { 1.0 };
    let g_inf = inf_norm(g).max(1e-12);
    let mut min_level: i32 = 0;
    let mut rho = rho0;
    let mut factor = Factor::new(&g_faer, rho);

    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let shift = |z: &DVector<f64>| {
        let sigma = big_g * z + g;
        let mut s = DVector::zeros(n);
        for c in 0..nc {
            s[3 * c + 2] = de_saxce(&triple(&sigma, c), problem.mu[c]).z;
        }
        (sigma, s)
    };
    // One ADMM sweep from (z, u) with the shift of z; returns (x, z', u').
    let sweep = |z: &DVector<f64>, u: &DVector<f64>, s: &DVector<f64>, rho: f64, factor: &Factor| {
        let rhs = (z - u) * rho - g - s;
        let x = factor.solve(&rhs);
        let xu = &x + u;
        let mut zn = DVector::zeros(n);
        for c in 0..nc {
            zn.fixed_rows_mut::<3>(3 * c).copy_from(&project_cone(&triple(&xu, c), problem.mu[c]));
        }
        let un = &xu - &zn;
        (x, zn, un)
    };
    let stack = |z: &DVector<f64>, u: &DVector<f64>| {
        let mut w = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(z);
        w.rows_mut(n, n).copy_from(u);
        w
    };

    let mut history = Anderson::new(opts.anderson);
    let mut s = shift(&z).1;
    // Plain ADMM image of the last accepted state, used when an
    // extrapolated state turns out worse.
    let mut fallback: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut last_norm = f64::INFINITY;
    let mut iters = 0;
    let mut level = min_level;
    for it in 1..=opts.max_iters {
        iters = it;
        let (x, zn, un) = sweep(&z, &u, &s, rho, &factor);
        let w = stack(&z, &u);
        let wn = stack(&zn, &un);
        let f_norm = (&wn - &w).norm();
        if history.enabled() && f_norm > last_norm {
            if let Some((fz, fu)) = fallback.take() {
                history.clear();
                s = shift(&fz).1;
                z = fz;
                u = fu;
                continue;
            }
        }
        last_norm = f_norm;
        fallback = Some((zn.clone(), un.clone()));

        let (sigma, sn) = shift(&zn);
        if !(sigma.amax() <= 1e3 * g_inf) {
            // The lagged shift made the iteration unstable: restart from
            // zero with a larger penalty that is kept from now on.
            min_level = level.max(min_level) + 1;
            level = min_level;
            rho = rho0 * 2f64.powi(level);
            factor = Factor::new(&g_faer, rho);
            z.fill(0.0);
            u.fill(0.0);
            s = shift(&z).1;
            history.clear();
            fallback = None;
            last_norm = f64::INFINITY;
            continue;
        }
        let primal = (&x - &zn).amax();
        let dual = rho * (&zn - &z).amax();
        let res = residual_with(problem, &zn, &sigma, g_norm);
        if res < best_res {
            best_res = res;
            best_z.copy_from(&zn);
            best_primal = primal;
            best_dual = dual;
        }
        if res <= opts.tol {
            break;
        }

        let mut scale_by = 1.0;
        if it % opts.adapt_every == 0 {
            if primal > 10.0 * dual && level < opts.max_rho_doublings {
                level += 1;
                scale_by = 2.0;
            } else if dual > 10.0 * primal && level > min_level {
                level -= 1;
                scale_by = 0.5;
            }
        }
        if scale_by != 1.0 {
            rho *= scale_by;
            factor = Factor::new(&g_faer, rho);
            z = zn;
            u = un / scale_by;
            s = sn;
            history.clear();
            fallback = None;
            last_norm = f64::INFINITY;
            continue;
        }
        match history.extrapolate(&w, &wn) {
            Some(next) => {
                z = next.rows(0, n).into_owned();
                u = next.rows(n, n).into_owned();
                s = shift(&z).1;
            }
            None => {
                z = zn;
                u = un;
                s = sn;
            }
        }
    }
    if opts.polish_sweeps > 0 {
        let polished = polish(problem, &best_z, opts.polish_sweeps);
        let res = ncp_residual(problem, &polished);
        if res <= best_res.max(opts.tol) {
            best_z = polished;
            best_res = res;
        }
    }
    if best_res > opts.tol {
        log::debug!("admm stopped after {iters} iterations at residual {best_res:.3e} ({nc} contacts)");
    }
    finish(best_z, iters, best_primal, best_dual, best_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn problem(g_mat: DMatrix<f64>, g: &[f64], mu: Vec<f64>) -> ContactProblem {
        ContactProblem { delassus: g_mat, free_velocity: DVector::from_row_slice(g), mu }
    }

    #[test]
    fn cone_projection_cases() {
        assert_eq!(project_cone(&Vec3::new(0.0, 0.0, 1.0), 0.5), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(project_cone(&Vec3::new(1.0, 0.0, 0.0), 0.0), Vec3::zeros());
        let p = project_cone(&Vec3::new(1.0, 0.0, 0.0), 1.0);
        assert!((p - Vec3::new(0.5, 0.0, 0.5)).norm() < 1e-15);
        assert_eq!(project_cone(&Vec3::new(0.3, 0.1, 2.0), 0.0), Vec3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mu = rng.random_range(0.0..2.0);
            let p = project_cone(&x, mu);
            assert!((project_cone(&p, mu) - p).norm() < 1e-14);
            // Moreau: x - p lies in the polar cone and is orthogonal to p.
            assert!((x - p).dot(&p).abs() < 1e-12);
            assert!(p.x.hypot(p.y) <= mu * p.z + 1e-12);
        }
    }

    #[test]
    fn de_saxce_cases() {
        assert_eq!(de_saxce(&Vec3::new(0.0, 0.0, 3.0), 0.7), Vec3::zeros());
        assert_eq!(de_saxce(&Vec3::new(3.0, 4.0, 0.0), 0.5), Vec3::new(0.0, 0.0, 2.5));
        assert_eq!(de_saxce(&Vec3::new(3.0, 4.0, 1.0), 0.0), Vec3::zeros());
    }

    #[test]
    fn separating_contacts_need_no_iterations() {
        let p = problem(DMatrix::identity(6, 6), &[0.2, 0.0, 1.0, 0.0, -0.3, 0.0], vec![0.5, 0.5]);
        let r = solve(&p, AdmmOptions::default());
        assert!(r.converged && r.iterations <= 2);
        assert_eq!(r.lambda, DVector::zeros(6));
    }

    #[test]
    fn frictionless_single_contact() {
        let p = problem(DMatrix::identity(3, 3), &[0.0, 0.0, -1.0], vec![0.0]);
        let r = solve(&p, AdmmOptions::default());
        assert!(r.converged);
        assert!((r.lambda - DVector::from_row_slice(&[0.0, 0.0, 1.0])).amax() < 1e-5);
        assert!(r.sigma[2].abs() < 1e-5);
    }

    #[test]
    fn sticking_single_contact() {
        let p = problem(DMatrix::identity(3, 3), &[-0.1, 0.0, -1.0], vec![10.0]);
        let r = solve(&p, AdmmOptions::default());
        assert!(r.converged);
        assert!((r.lambda - DVector::from_row_slice(&[0.1, 0.0, 1.0])).amax() < 1e-5);
        assert!(r.sigma.amax() < 1e-5);
    }

    #[test]
    fn sliding_single_contact() {
        // Diagonal G: sliding solution lambda = (mu lambda_N, 0, lambda_N)
        // with lambda_N = 1 and tangential velocity -0.5 + 0.3 < 0.
        let p = problem(DMatrix::identity(3, 3), &[-0.5, 0.0, -1.0], vec![0.3]);
        let r = solve(&p, AdmmOptions { tol: 1e-10, max_iters: 5000, adapt_every: 10, ..AdmmOptions::default() });
        assert!(r.converged);
        assert!((r.lambda - DVector::from_row_slice(&[0.3, 0.0, 1.0])).amax() < 1e-8);
        assert!((r.sigma[0] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn single_contact_closed_forms() {
        let w = Mat3::identity();
        assert_eq!(solve_single(&w, &Vec3::new(0.3, 0.0, 0.5), 0.5), Some(Vec3::zeros()));
        let stick = solve_single(&w, &Vec3::new(-0.1, 0.0, -1.0), 10.0).unwrap();
        assert!((stick - Vec3::new(0.1, 0.0, 1.0)).norm() < 1e-14);
        let slide = solve_single(&w, &Vec3::new(-0.6, -0.8, -1.0), 0.5).unwrap();
        assert!((slide - Vec3::new(0.3, 0.4, 1.0)).norm() < 1e-12, "{slide:?}");
        let frictionless = solve_single(&(w * 2.0), &Vec3::new(-1.0, 0.0, -1.0), 0.0).unwrap();
        assert_eq!(frictionless, Vec3::new(0.0, 0.0, 0.5));
    }

    #[test]
    fn single_contact_solve_matches_oracle_on_coupled_blocks() {
        // Non-diagonal W: the sliding impulse must oppose the resulting slip.
        let w = Mat3::new(2.0, 0.3, 0.2, 0.3, 1.5, -0.1, 0.2, -0.1, 1.0);
        let b = Vec3::new(-1.0, 0.7, -0.8);
        let l = solve_single(&w, &b, 0.4).unwrap();
        let s = w * l + b;
        assert!(s.z.abs() < 1e-12);
        let (lt, st) = (l.x.hypot(l.y), s.x.hypot(s.y));
        assert!((lt - 0.4 * l.z).abs() < 1e-12);
        assert!((l.x * s.x + l.y * s.y + lt * st).abs() < 1e-12 * lt * st);
    }

    #[test]
    fn empty_problem() {
        let p = problem(DMatrix::zeros(0, 0), &[], vec![]);
        let r = solve(&p, AdmmOptions::default());
        assert!(r.converged && r.iterations == 0);
    }
}

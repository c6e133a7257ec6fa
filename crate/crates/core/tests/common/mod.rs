//! Shared helpers for the integration tests.

#![allow(dead_code)]

use frictional_mpm::ncp::{de_saxce, project_dual_cone};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frictional_mpm::math::Vec3;

#[derive(Clone, Copy, PartialEq, Debug)]
enum Mode {
    Separate,
    Stick,
    Slide,
}

fn triple(v: &DVector<f64>, c: usize) -> Vec3 {
    Vec3::new(v[3 * c], v[3 * c + 1], v[3 * c + 2])
}

/// Impulses for a mode assignment and sliding angles, or `None` when the
/// reduced linear system is singular.
fn solve_modes(g: &DMatrix<f64>, gv: &DVector<f64>, mu: &[f64], modes: &[Mode], theta: &[f64]) -> Option<DVector<f64>> {
    let n = mu.len();
    // Unknown columns and equation rows.
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut rows: Vec<usize> = Vec::new();
    let mut slots: Vec<(usize, Option<Vec3>)> = Vec::new();
    let mut k = 0;
    for c in 0..n {
        match modes[c] {
            Mode::Separate => {}
            Mode::Stick => {
                for a in 0..3 {
                    cols.push(g.column(3 * c + a).into_owned());
                    rows.push(3 * c + a);
                    slots.push((3 * c + a, None));
                }
            }
            Mode::Slide => {
                let d = Vec3::new(-mu[c] * theta[k].cos(), -mu[c] * theta[k].sin(), 1.0);
                k += 1;
                let col = g.column(3 * c) * d.x + g.column(3 * c + 1) * d.y + g.column(3 * c + 2) * d.z;
                cols.push(col);
                rows.push(3 * c + 2);
                slots.push((c, Some(d)));
            }
        }
    }
    let m = cols.len();
    let mut lambda = DVector::zeros(3 * n);
    if m == 0 {
        return Some(lambda);
    }
    let a = DMatrix::from_fn(m, m, |i, j| cols[j][rows[i]]);
    let b = DVector::from_fn(m, |i, _| -gv[rows[i]]);
    let x = a.lu().solve(&b)?;
    for (j, (slot, dir)) in slots.iter().enumerate() {
        match dir {
            None => lambda[*slot] = x[j],
            Some(d) => {
                for a in 0..3 {
                    lambda[3 * slot + a] = x[j] * d[a];
                }
            }
        }
    }
    Some(lambda)
}

fn slide_residual(g: &DMatrix<f64>, gv: &DVector<f64>, mu: &[f64], modes: &[Mode], theta: &[f64]) -> Option<DVector<f64>> {
    let lambda = solve_modes(g, gv, mu, modes, theta)?;
    let sigma = g * &lambda + gv;
    let mut r = Vec::new();
    let mut k = 0;
    for (c, m) in modes.iter().enumerate() {
        if *m == Mode::Slide {
            let s = triple(&sigma, c);
            r.push(-s.x * theta[k].sin() + s.y * theta[k].cos());
            k += 1;
        }
    }
    Some(DVector::from_vec(r))
}

fn valid(g: &DMatrix<f64>, gv: &DVector<f64>, mu: &[f64], modes: &[Mode], theta: &[f64], lambda: &DVector<f64>, tol: f64) -> bool {
    let sigma = g * lambda + gv;
    let mut k = 0;
    for c in 0..mu.len() {
        let l = triple(lambda, c);
        let s = triple(&sigma, c);
        let ok = match modes[c] {
            Mode::Separate => {
                let sh = s + de_saxce(&s, mu[c]);
                (sh - project_dual_cone(&sh, mu[c])).norm() <= tol
            }
            Mode::Stick => l.z >= -tol && l.x.hypot(l.y) <= mu[c] * l.z + tol,
            Mode::Slide => {
                let dir = (theta[k].cos(), theta[k].sin());
                k += 1;
                l.z >= -tol && s.x * dir.0 + s.y * dir.1 >= -tol
            }
        };
        if !ok {
            return false;
        }
    }
    true
}

/// All solutions of the frictional contact problem found by enumerating
/// separating, sticking and sliding modes per contact. Sliding directions
/// are found by Newton iterations from several starting angles.
pub fn enumerate_solutions(g: &DMatrix<f64>, gv: &DVector<f64>, mu: &[f64]) -> Vec<DVector<f64>> {
    let n = mu.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let modes: Vec<Mode> = (0..n).map(|c| [Mode::Separate, Mode::Stick, Mode::Slide][(code / 3usize.pow(c as u32)) % 3]).collect();
        let ns = modes.iter().filter(|m| **m == Mode::Slide).count();
        let starts_per: usize = if ns == 0 { 1 } else { 8 };
        let n_starts = starts_per.pow(ns as u32);
        for start in 0..n_starts {
            let mut theta: Vec<f64> = (0..ns)
                .map(|k| (start / starts_per.pow(k as u32) % starts_per) as f64 * std::f64::consts::TAU / starts_per as f64)
                .collect();
            let mut ok = true;
            for _ in 0..60 {
                if ns == 0 {
                    break;
                }
                let Some(r) = slide_residual(g, gv, mu, &modes, &theta) else {
                    ok = false;
                    break;
                };
                if r.amax() < 1e-14 {
                    break;
                }
                let h = 1e-7;
                let mut jac = DMatrix::zeros(ns, ns);
                for j in 0..ns {
                    let mut tp = theta.clone();
                    tp[j] += h;
                    let Some(rp) = slide_residual(g, gv, mu, &modes, &tp) else {
                        ok = false;
                        break;
                    };
                    jac.set_column(j, &((rp - &r) / h));
                }
                if !ok {
                    break;
                }
                let Some(step) = jac.lu().solve(&(-&r)) else {
                    ok = false;
                    break;
                };
                let step = if step.amax() > 0.5 { &step * (0.5 / step.amax()) } else { step };
                for j in 0..ns {
                    theta[j] += step[j];
                }
            }
            if !ok {
                continue;
            }
            if ns > 0 && slide_residual(g, gv, mu, &modes, &theta).is_none_or(|r| r.amax() > 1e-10) {
                continue;
            }
            let Some(lambda) = solve_modes(g, gv, mu, &modes, &theta) else { continue };
            if valid(g, gv, mu, &modes, &theta, &lambda, 1e-9) && !out.iter().any(|s| (s - &lambda).amax() < 1e-8) {
                out.push(lambda);
            }
        }
    }
    out
}

/// Random SPD Delassus matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(lo..hi)));
    let g = &q * d * q.transpose();
    (&g + g.transpose()) * 0.5
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

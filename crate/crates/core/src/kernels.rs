//! Interpolation kernels relating particle positions to grid nodes.

use crate::error::{MpmError, Result};
use crate::math::Vec3;
use crate::scene::KernelKind;

/// Box of lattice nodes `lo .. lo + dims` on the lattice `origin + spacing * Z^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec3,
    pub spacing: f64,
    pub lo: [i64; 3],
    pub dims: [usize; 3],
}

impl GridGeometry {
    /// Smallest box covering `points` with `pad` extra nodes on every side.
    pub fn covering<'a>(origin: Vec3, spacing: f64, points: impl IntoIterator<Item = &'a Vec3>, pad: i64) -> Result<Self> {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for p in points {
            for a in 0..3 {
                let c = (p[a] - origin[a]) / spacing;
                if !c.is_finite() || c.abs() > 1e9 {
                    return Err(MpmError::OutOfGrid { x: p.x, y: p.y, z: p.z });
                }
                let c = c.floor() as i64;
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        if lo[0] > hi[0] {
            return Ok(Self { origin, spacing, lo: [0; 3], dims: [0; 3] });
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            lo[a] -= pad;
            dims[a] = (hi[a] + pad + 1 - lo[a] + 1) as usize;
        }
        if dims.iter().product::<usize>() > 50_000_000 {
            return Err(MpmError::Config(format!("grid of {dims:?} nodes is too large; the simulation has blown up")));
        }
        Ok(Self { origin, spacing, lo, dims })
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    fn flat(&self, c: [i64; 3]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..3 {
            let r = c[a] - self.lo[a];
            if r < 0 || r as usize >= self.dims[a] {
                return None;
            }
            idx = idx * self.dims[a] + r as usize;
        }
        Some(idx)
    }

    pub fn node_coords(&self, flat: usize) -> [i64; 3] {
        let k = flat % self.dims[2];
        let j = (flat / self.dims[2]) % self.dims[1];
        let i = flat / (self.dims[2] * self.dims[1]);
        [self.lo[0] + i as i64, self.lo[1] + j as i64, self.lo[2] + k as i64]
    }

    pub fn node_position(&self, flat: usize) -> Vec3 {
        let c = self.node_coords(flat);
        self.origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.spacing
    }
}

/// Weights and gradients of every node influencing one position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelStencil {
    pub node_indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub gradients: Vec<Vec3>,
}

impl KernelStencil {
    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, &Vec3)> + '_ {
        self.node_indices
            .iter()
            .zip(&self.weights)
            .zip(&self.gradients)
            .map(|((&i, &w), g)| (i, w, g))
    }
}

/// 1-D kernel values and derivatives (in lattice units) at fractional
/// coordinate `c`; returns the first node index.
fn weights_1d(kernel: KernelKind, c: f64) -> (i64, [f64; 3], [f64; 3], usize) {
    match kernel {
        KernelKind::Linear => {
            let base = c.floor();
            let u = c - base;
            (base as i64, [1.0 - u, u, 0.0], [-1.0, 1.0, 0.0], 2)
        }
        KernelKind::QuadraticBSpline => {
            let base = (c - 0.5).floor();
            let fx = c - base;
            let w = [0.5 * (1.5 - fx).powi(2), 0.75 - (fx - 1.0).powi(2), 0.5 * (fx - 0.5).powi(2)];
            let dw = [fx - 1.5, -2.0 * (fx - 1.0), fx - 0.5];
            (base as i64, w, dw, 3)
        }
    }
}

/// Quadratic B-spline `N(u)` for a node at signed lattice distance `u`.
pub fn quadratic_bspline(u: f64) -> f64 {
    let a = u.abs();
    if a < 0.5 {
        0.75 - a * a
    } else if a < 1.5 {
        0.5 * (1.5 - a).powi(2)
    } else {
        0.0
    }
}

/// Tensor-product stencil at `x`: 8 nodes for linear, 27 for quadratic.
pub fn stencil(x: &Vec3, kernel: KernelKind, grid: &GridGeometry) -> Result<KernelStencil> {
    let h = grid.spacing;
    let mut base = [0i64; 3];
    let mut w = [[0.0; 3]; 3];
    let mut dw = [[0.0; 3]; 3];
    let mut n = 0;
    for a in 0..3 {
        let c = (x[a] - grid.origin[a]) / h;
        if !c.is_finite() {
            return Err(MpmError::OutOfGrid { x: x.x, y: x.y, z: x.z });
        }
        let (b, wa, dwa, na) = weights_1d(kernel, c);
        base[a] = b;
        w[a] = wa;
        dw[a] = dwa;
        n = na;
    }

    let mut out = KernelStencil {
        node_indices: Vec::with_capacity(n * n * n),
        weights: Vec::with_capacity(n * n * n),
        gradients: Vec::with_capacity(n * n * n),
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let flat = grid
                    .flat([base[0] + i as i64, base[1] + j as i64, base[2] + k as i64])
                    .ok_or(MpmError::OutOfGrid { x: x.x, y: x.y, z: x.z })?;
                out.node_indices.push(flat);
                out.weights.push(w[0][i] * w[1][j] * w[2][k]);
                out.gradients.push(
                    Vec3::new(
                        dw[0][i] * w[1][j] * w[2][k],
                        w[0][i] * dw[1][j] * w[2][k],
                        w[0][i] * w[1][j] * dw[2][k],
                    ) / h,
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridGeometry {
        GridGeometry { origin: Vec3::new(0.1, -0.2, 0.05), spacing: 0.1, lo: [-5; 3], dims: [20; 3] }
    }

    #[test]
    fn quadratic_center_weight() {
        assert_eq!(quadratic_bspline(0.0), 0.75);
        // A particle at a node: the center node gets 0.75.
        let g = grid();
        let s = stencil(&g.node_position(g.flat([2, 3, 4]).unwrap()), KernelKind::QuadraticBSpline, &g).unwrap();
        assert_eq!(s.len(), 27);
        let center = g.flat([2, 3, 4]).unwrap();
        let w = s.iter().find(|e| e.0 == center).unwrap().1;
        assert!((w - 0.75f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn linear_at_node_is_interpolating() {
        let g = grid();
        let node = g.flat([1, -2, 3]).unwrap();
        let s = stencil(&g.node_position(node), KernelKind::Linear, &g).unwrap();
        assert_eq!(s.len(), 8);
        for (i, w, _) in s.iter() {
            if i == node {
                assert!((w - 1.0).abs() < 1e-12);
            } else {
                assert!(w.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outside_is_reported() {
        let g = grid();
        assert!(matches!(
            stencil(&Vec3::new(100.0, 0.0, 0.0), KernelKind::Linear, &g),
            Err(MpmError::OutOfGrid { .. })
        ));
    }

    #[test]
    fn partition_of_unity_and_completeness() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kernel in [KernelKind::Linear, KernelKind::QuadraticBSpline] {
            for _ in 0..10_000 {
                let x = g.origin + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.6;
                let s = stencil(&x, kernel, &g).unwrap();
                let sum: f64 = s.weights.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
                let gsum: Vec3 = s.gradients.iter().sum();
                assert!(gsum.norm() <= 1e-10);
                let recon: Vec3 = s.iter().map(|(i, w, _)| g.node_position(i) * w).sum();
                assert!((recon - x).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let field = |p: Vec3| (3.0 * p.x).sin() + p.y * p.z + (p.z * 2.0).exp();
        for kernel in [KernelKind::Linear, KernelKind::QuadraticBSpline] {
            for _ in 0..200 {
                let x = g.origin + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.5;
                let s = stencil(&x, kernel, &g).unwrap();
                let grad: Vec3 = s.iter().map(|(i, _, dg)| dg * field(g.node_position(i))).sum();
                let interp = |y: Vec3| -> f64 {
                    let t = stencil(&y, kernel, &g).unwrap();
                    t.iter().map(|(i, w, _)| w * field(g.node_position(i))).sum()
                };
                let eps = 1e-7;
                for a in 0..3 {
                    let mut e = Vec3::zeros();
                    e[a] = eps;
                    // Stay inside one cell so the linear kernel is differentiable.
                    let fd = (interp(x + e) - interp(x - e)) / (2.0 * eps);
                    let scale = grad.norm().max(1.0);
                    assert!((fd - grad[a]).abs() <= 1e-6 * scale, "{kernel:?} axis {a}: {fd} vs {}", grad[a]);
                }
            }
        }
    }
}

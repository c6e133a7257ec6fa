//! Contact Jacobian, Delassus operator and impulse application.
//!
//! Each contact is lifted onto the four deformed vertices of both tets
//! (weighted by the barycentric coordinates of the contact point) and each
//! vertex is deposited onto the active nodes of its body's grid. The row
//! block of contact `c` maps grid velocities to `R_c^T (v_A - v_B)`.

use std::collections::BTreeMap;

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::collision::ContactPoint;
use crate::error::{MpmError, Result};
use crate::implicit::SystemMatrices;
use crate::kernels::stencil;
use crate::math::Mat3;
use crate::scene::{KernelKind, Particle};
use crate::transfers::Grid;

/// What the Jacobian needs to know about one body.
#[derive(Debug, Clone, Copy)]
pub struct BodyView<'a> {
    pub particles: &'a [Particle],
    /// `None` for kinematic bodies, which own no DOFs.
    pub grid: Option<&'a Grid>,
}

/// One 3x3 block of a contact row: `block * v_node` contributes to the
/// contact-frame relative velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianEntry {
    pub body: usize,
    /// Dense DOF-block index on the body's grid.
    pub node: usize,
    pub block: Mat3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactJacobian {
    pub contact_count: usize,
    /// Per contact, entries sorted by `(body, node)`.
    pub rows: Vec<Vec<JacobianEntry>>,
    /// DOF count of each body (zero for kinematic ones).
    pub dof_counts: Vec<usize>,
}

impl ContactJacobian {
    /// Offset of each body in the concatenated DOF vector.
    pub fn dof_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.dof_counts
            .iter()
            .map(|&n| {
                let o = acc;
                acc += n;
                o
            })
            .collect()
    }

    /// `H v` with `v` given per body.
    pub fn mul(&self, v: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.contact_count];
        for (c, row) in self.rows.iter().enumerate() {
            for e in row {
                let vb = &v[e.body];
                let vn = nalgebra::Vector3::new(vb[3 * e.node], vb[3 * e.node + 1], vb[3 * e.node + 2]);
                let r = e.block * vn;
                for k in 0..3 {
                    out[3 * c + k] += r[k];
                }
            }
        }
        out
    }

    /// `H^T lambda`, split per body.
    pub fn transpose_mul(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.dof_counts.iter().map(|&n| vec![0.0; n]).collect();
        for (c, row) in self.rows.iter().enumerate() {
            let l = nalgebra::Vector3::new(lambda[3 * c], lambda[3 * c + 1], lambda[3 * c + 2]);
            for e in row {
                let r = e.block.transpose() * l;
                for k in 0..3 {
                    out[e.body][3 * e.node + k] += r[k];
                }
            }
        }
        out
    }

    /// Dense `H` over the concatenated DOF vector.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let offsets = self.dof_offsets();
        let mut h = DMatrix::zeros(3 * self.contact_count, self.dof_counts.iter().sum());
        for (c, row) in self.rows.iter().enumerate() {
            for e in row {
                let col = offsets[e.body] + 3 * e.node;
                for r in 0..3 {
                    for k in 0..3 {
                        h[(3 * c + r, col + k)] += e.block[(r, k)];
                    }
                }
            }
        }
        h
    }
}

/// Builds the stacked contact Jacobian.
///
/// Each proxy vertex samples the owning grid with its kernel weights
/// restricted to active nodes and renormalized to sum to one, so a uniform
/// grid velocity is reproduced exactly.
pub fn build_jacobian(contacts: &[ContactPoint], bodies: &[BodyView], kernel: KernelKind) -> Result<ContactJacobian> {
    let dof_counts: Vec<usize> = bodies.iter().map(|b| b.grid.map_or(0, |g| 3 * g.active_count())).collect();
    let mut rows = Vec::with_capacity(contacts.len());
    for (ci, c) in contacts.iter().enumerate() {
        let rt = c.frame().transpose();
        let mut acc: BTreeMap<(usize, usize), Mat3> = BTreeMap::new();
        for (sign, prim, bary) in [(1.0, c.prim_a, &c.bary_a), (-1.0, c.prim_b, &c.bary_b)] {
            let Some(grid) = bodies[prim.body].grid else { continue };
            let verts = bodies[prim.body].particles[prim.particle].deformed_primitive();
            for (x, &phi) in verts.iter().zip(bary) {
                if phi == 0.0 {
                    continue;
                }
                let s = stencil(x, kernel, &grid.geometry)?;
                let active: Vec<(usize, f64)> =
                    s.iter().filter_map(|(i, w, _)| grid.active_map[i].filter(|_| w > 0.0).map(|d| (d, w))).collect();
                let total: f64 = active.iter().map(|a| a.1).sum();
                if total <= 0.0 {
                    return Err(MpmError::EmptySupport { contact: ci });
                }
                for (d, w) in active {
                    *acc.entry((prim.body, d)).or_insert_with(Mat3::zeros) += rt * (sign * phi * w / total);
                }
            }
        }
        rows.push(acc.into_iter().map(|((body, node), block)| JacobianEntry { body, node, block }).collect());
    }
    Ok(ContactJacobian { contact_count: contacts.len(), rows, dof_counts })
}

/// Dense contact problem: Delassus operator `G = H A^{-1} H^T`, free
/// contact velocity `g = H v^free` and friction coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactProblem {
    pub delassus: DMatrix<f64>,
    pub free_velocity: DVector<f64>,
    pub mu: Vec<f64>,
}

impl ContactProblem {
    pub fn contact_count(&self) -> usize {
        self.mu.len()
    }
}

/// Contacts touching each body, in contact order.
fn contacts_per_body(h: &ContactJacobian) -> Vec<Vec<usize>> {
    let mut per: Vec<Vec<usize>> = vec![Vec::new(); h.dof_counts.len()];
    for (c, row) in h.rows.iter().enumerate() {
        let mut last = usize::MAX;
        for e in row {
            if e.body != last {
                per[e.body].push(c);
                last = e.body;
            }
        }
    }
    per
}

/// Assembles the contact problem. `systems[b]` and `v_free[b]` belong to
/// body `b`; kinematic bodies pass `None` and an empty vector.
pub fn build_delassus(h: &ContactJacobian, systems: &[Option<&SystemMatrices>], v_free: &[Vec<f64>], mu: Vec<f64>) -> ContactProblem {
    let nc = h.contact_count;
    let mut g_mat = DMatrix::<f64>::zeros(3 * nc, 3 * nc);
    for (b, contacts) in contacts_per_body(h).iter().enumerate() {
        let Some(sys) = systems[b] else { continue };
        if contacts.is_empty() {
            continue;
        }
        // Columns of H^T restricted to this body and its contacts.
        let mut y = Mat::<f64>::zeros(sys.dof_count, 3 * contacts.len());
        for (j, &c) in contacts.iter().enumerate() {
            for e in h.rows[c].iter().filter(|e| e.body == b) {
                for r in 0..3 {
                    for k in 0..3 {
                        y[(3 * e.node + k, 3 * j + r)] += e.block[(r, k)];
                    }
                }
            }
        }
        sys.admittance_apply_many(&mut y);
        for &c in contacts {
            for e in h.rows[c].iter().filter(|e| e.body == b) {
                for (j, &c2) in contacts.iter().enumerate() {
                    for r in 0..3 {
                        for s in 0..3 {
                            let mut sum = 0.0;
                            for k in 0..3 {
                                sum += e.block[(r, k)] * y[(3 * e.node + k, 3 * j + s)];
                            }
                            g_mat[(3 * c + r, 3 * c2 + s)] += sum;
                        }
                    }
                }
            }
        }
    }
    let g = DVector::from_vec(h.mul(v_free));
    let delassus = (&g_mat + g_mat.transpose()) * 0.5;
    ContactProblem { delassus, free_velocity: g, mu }
}

/// Grid velocity corrections `A^{-1} H^T lambda` per body.
pub fn apply_impulses(h: &ContactJacobian, systems: &[Option<&SystemMatrices>], lambda: &[f64]) -> Vec<Vec<f64>> {
    h.transpose_mul(lambda)
        .into_iter()
        .zip(systems)
        .map(|(rhs, sys)| match sys {
            Some(s) if !rhs.is_empty() => s.admittance_apply(&rhs),
            _ => rhs,
        })
        .collect()
}

//! Contact localization between deformed particle tetrahedra.
//!
//! Candidate pairs come from a spatial hash. Each pair is resolved by a
//! separating-axis test; separated pairs within the margin get GJK witness
//! points, penetrating pairs get the least-overlap axis.

mod broadphase;
mod gjk;
mod sat;

pub use broadphase::{bounding_radius, boxes_overlap, broadphase};
pub use gjk::{distance, Closest};
pub use sat::{candidate_axes, least_overlap, least_overlap_along, surface_axes, SatResult};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{MpmError, Result};
use crate::math::{tangent_frame, Mat3, Vec3};
use crate::scene::{signed_volume, Particle};

/// A particle's tet advected by its deformation gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedPrimitive {
    pub vertices: [Vec3; 4],
    /// Whether face `i` (opposite vertex `i`) lies on the body surface.
    pub surface: [bool; 4],
    pub particle_id: usize,
    pub body_id: usize,
}

impl DeformedPrimitive {
    /// A free-standing tet, all of whose faces are on the surface.
    pub fn new(vertices: [Vec3; 4], particle_id: usize, body_id: usize) -> Self {
        Self { vertices, surface: [true; 4], particle_id, body_id }
    }

    pub fn from_particle(p: &Particle, particle_id: usize) -> Self {
        Self { vertices: p.deformed_primitive(), surface: p.surface, particle_id, body_id: p.body_id }
    }

    fn key(&self) -> (usize, usize) {
        (self.body_id, self.particle_id)
    }

    fn check(&self) -> Result<()> {
        let [a, b, c, d] = self.vertices;
        let edge = [b - a, c - a, d - a, c - b, d - b, d - c].iter().map(|e| e.norm()).fold(0.0, f64::max);
        let vol = signed_volume(&a, &b, &c, &d);
        if !(vol > 1e-12 * edge.powi(3)) {
            return Err(MpmError::DegeneratePrimitive { body: self.body_id, particle: self.particle_id });
        }
        Ok(())
    }
}

/// All primitives of all bodies, ordered by body then particle.
pub fn deformed_primitives(bodies: &[Vec<Particle>]) -> Vec<DeformedPrimitive> {
    bodies
        .iter()
        .flat_map(|ps| ps.iter().enumerate().map(|(i, p)| DeformedPrimitive::from_particle(p, i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimitiveRef {
    pub body: usize,
    pub particle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub x_c: Vec3,
    /// Unit normal pointing from body B toward body A.
    pub normal: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    /// Signed distance; negative when penetrating.
    pub gap: f64,
    pub prim_a: PrimitiveRef,
    pub prim_b: PrimitiveRef,
    pub bary_a: [f64; 4],
    pub bary_b: [f64; 4],
}

impl ContactPoint {
    /// `R_c = [t1, t2, n]`, mapping frame coordinates to world.
    pub fn frame(&self) -> Mat3 {
        Mat3::from_columns(&[self.t1, self.t2, self.normal])
    }

    /// The same contact seen from the other side.
    pub fn flipped(self) -> Self {
        let normal = -self.normal;
        let (t1, t2) = tangent_frame(&normal);
        Self {
            normal,
            t1,
            t2,
            prim_a: self.prim_b,
            prim_b: self.prim_a,
            bary_a: self.bary_b,
            bary_b: self.bary_a,
            ..self
        }
    }

    fn sort_key(&self) -> (usize, usize, usize, usize) {
        (self.prim_a.body, self.prim_b.body, self.prim_a.particle, self.prim_b.particle)
    }
}

/// Closest point on triangle `abc` to `p` as barycentric weights
/// (Ericson, Real-Time Collision Detection, 5.1.5).
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Barycentric weights of the point of tet `t` closest to `x`.
pub fn barycentric(t: &[Vec3; 4], x: &Vec3) -> [f64; 4] {
    let m = Mat3::from_columns(&[t[1] - t[0], t[2] - t[0], t[3] - t[0]]);
    if let Some(inv) = m.try_inverse() {
        let mu = inv * (x - t[0]);
        let w = [1.0 - mu.sum(), mu.x, mu.y, mu.z];
        if w.iter().all(|&l| l >= 0.0) {
            return w;
        }
    }
    const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let mut best = (f64::INFINITY, [0.0; 4]);
    for f in FACES {
        let l = closest_on_triangle(x, &t[f[0]], &t[f[1]], &t[f[2]]);
        let q = t[f[0]] * l[0] + t[f[1]] * l[1] + t[f[2]] * l[2];
        let d = (q - x).norm_squared();
        if d < best.0 {
            let mut w = [0.0; 4];
            for k in 0..3 {
                w[f[k]] = l[k].max(0.0);
            }
            let s: f64 = w.iter().sum();
            best = (d, w.map(|v| v / s));
        }
    }
    best.1
}

/// Angular slack, in radians, allowed between a separated contact normal and
/// the surface normal cone at its witness points.
pub const NORMAL_CONE_TOLERANCE: f64 = 0.1;

/// Outward unit normal of face `i` (opposite vertex `i`) of `t`.
fn face_normal(t: &[Vec3; 4], i: usize) -> Vec3 {
    let f = sat::FACES[i];
    let n = (t[f[1]] - t[f[0]]).cross(&(t[f[2]] - t[f[0]]));
    let n = if n.dot(&(t[i] - t[f[0]])) > 0.0 { -n } else { n };
    n.normalize()
}

/// Whether the unit direction `n` lies, up to `NORMAL_CONE_TOLERANCE`, in
/// the cone spanned by the outward normals of the surface faces of `t`
/// through the point with barycentric weights `w`.
fn in_surface_cone(t: &[Vec3; 4], surface: &[bool; 4], w: &[f64; 4], n: &Vec3) -> bool {
    let normals: Vec<Vec3> = (0..4).filter(|&i| surface[i] && w[i] <= 1e-7).map(|i| face_normal(t, i)).collect();
    let slack = NORMAL_CONE_TOLERANCE.sin();
    (1..1u32 << normals.len()).any(|mask| {
        let cols: Vec<Vec3> = normals.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, v)| *v).collect();
        let m = DMatrix::from_fn(3, cols.len(), |r, c| cols[c][r]);
        let Ok(c) = m.clone().svd(true, true).solve(&DVector::from_column_slice(n.as_slice()), 1e-12) else {
            return false;
        };
        let residual = (m * &c - DVector::from_column_slice(n.as_slice())).norm();
        c.iter().all(|&x| x >= 0.0) && residual <= slack
    })
}

/// Localizes a contact between two primitives of different bodies, or
/// returns `None` when they are farther apart than `margin`.
///
/// Penetrating pairs take the least-overlap axis among surface faces and
/// surface edges. Separated pairs are kept only when the witness direction
/// lies in the surface normal cone of both tets, so that faces shared with
/// neighbouring tets never produce contacts.
///
/// The result only depends on the unordered pair: swapping the arguments
/// flips the normal and the sides.
pub fn narrowphase(a: &DeformedPrimitive, b: &DeformedPrimitive, margin: f64) -> Result<Option<ContactPoint>> {
    a.check()?;
    b.check()?;
    if a.key() > b.key() {
        return Ok(narrowphase(b, a, margin)?.map(ContactPoint::flipped));
    }
    let (va, vb) = (&a.vertices, &b.vertices);
    let sat = least_overlap(va, vb);
    let (x_c, normal, gap) = if sat.overlap < 0.0 {
        if -sat.overlap > margin {
            return Ok(None);
        }
        let c = distance(va, vb);
        if c.distance > margin {
            return Ok(None);
        }
        let diff = c.point_a - c.point_b;
        let normal = if c.distance > 0.0 { diff / c.distance } else { sat.axis };
        if !in_surface_cone(vb, &b.surface, &barycentric(vb, &c.point_b), &normal)
            || !in_surface_cone(va, &a.surface, &barycentric(va, &c.point_a), &(-normal))
        {
            return Ok(None);
        }
        ((c.point_a + c.point_b) * 0.5, normal, c.distance)
    } else {
        let axes = sat::surface_axes(va, &a.surface, vb, &b.surface);
        let sat = if axes.is_empty() { sat } else { sat::least_overlap_along(va, vb, &axes) };
        let n = sat.axis;
        let scale = va.iter().chain(vb).map(|v| (v - va[0]).norm()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;
        let fa = sat::support_feature(va, &n, tol);
        let fb = sat::support_feature(vb, &(-n), tol);
        let centroid = |f: &[Vec3]| f.iter().sum::<Vec3>() / f.len() as f64;
        let c = match fa.len().cmp(&fb.len()) {
            std::cmp::Ordering::Less => centroid(&fa),
            std::cmp::Ordering::Greater => centroid(&fb),
            std::cmp::Ordering::Equal => (centroid(&fa) + centroid(&fb)) * 0.5,
        };
        let mid = 0.5 * (sat.a_min + sat.b_max);
        let gap = if sat.overlap == 0.0 { 0.0 } else { -sat.overlap };
        (c + n * (mid - c.dot(&n)), n, gap)
    };
    let (t1, t2) = tangent_frame(&normal);
    Ok(Some(ContactPoint {
        x_c,
        normal,
        t1,
        t2,
        gap,
        prim_a: PrimitiveRef { body: a.body_id, particle: a.particle_id },
        prim_b: PrimitiveRef { body: b.body_id, particle: b.particle_id },
        bary_a: barycentric(va, &x_c),
        bary_b: barycentric(vb, &x_c),
    }))
}

/// Full detection pass: broadphase with cells of twice the largest tet
/// radius, then narrowphase per candidate. Pairs of two kinematic bodies are
/// skipped. The result is sorted by `(body_a, body_b, prim_a, prim_b)`.
pub fn detect(prims: &[DeformedPrimitive], kinematic: &[bool], margin: f64, parallel: bool) -> Result<Vec<ContactPoint>> {
    let radius = prims.iter().map(bounding_radius).fold(0.0, f64::max);
    let both_kinematic = |i: usize, j: usize| kinematic.get(i).copied().unwrap_or(false) && kinematic.get(j).copied().unwrap_or(false);
    let pairs: Vec<(usize, usize)> = broadphase(prims, 2.0 * radius, margin, both_kinematic)
        .into_iter()
        .filter(|&(i, j)| boxes_overlap(&prims[i], &prims[j], margin))
        .collect();
    let run = |&(i, j): &(usize, usize)| narrowphase(&prims[i], &prims[j], margin);
    let found: Vec<Option<ContactPoint>> = if parallel {
        pairs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        pairs.iter().map(run).collect::<Result<_>>()?
    };
    let mut contacts: Vec<ContactPoint> = found.into_iter().flatten().collect();
    contacts.sort_by_key(ContactPoint::sort_key);
    Ok(contacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prim(body: usize, particle: usize, v: [Vec3; 4]) -> DeformedPrimitive {
        DeformedPrimitive::new(v, particle, body)
    }

    fn unit_tet(offset: Vec3) -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()].map(|v| v + offset)
    }

    #[test]
    fn separated_beyond_margin_gives_nothing() {
        let margin = 0.01;
        let a = prim(0, 0, unit_tet(Vec3::new(0.0, 0.0, 1.0 + 2.0 * margin)));
        let b = prim(1, 0, unit_tet(Vec3::zeros()));
        assert!(narrowphase(&a, &b, margin).unwrap().is_none());
    }

    #[test]
    fn face_resting_on_face() {
        // A's bottom face lies exactly on B's top face at z = 1.
        let a = prim(0, 0, [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 2.0)]);
        let flat_top = prim(1, 0, [Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(0.2, 0.2, 0.0)]);
        let c = narrowphase(&a, &flat_top, 0.01).unwrap().unwrap();
        assert_eq!(c.gap, 0.0);
        assert!((c.normal - Vec3::z()).norm() < 1e-12, "{:?}", c.normal);
        assert!((c.x_c.z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_contact_has_unit_weight() {
        let t = unit_tet(Vec3::zeros());
        assert_eq!(barycentric(&t, &t[0]), [1.0, 0.0, 0.0, 0.0]);
        let w = barycentric(&t, &Vec3::new(-1.0, -1.0, -1.0));
        assert_eq!(w, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn frame_is_orthonormal_right_handed() {
        let a = prim(0, 0, unit_tet(Vec3::new(0.0, 0.0, 1.004)));
        let b = prim(1, 0, unit_tet(Vec3::zeros()));
        let c = narrowphase(&a, &b, 0.01).unwrap().unwrap();
        let r = c.frame();
        assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((c.bary_a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_tet_is_rejected() {
        let flat = prim(0, 3, [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)]);
        let b = prim(1, 0, unit_tet(Vec3::zeros()));
        assert!(matches!(narrowphase(&flat, &b, 0.1), Err(MpmError::DegeneratePrimitive { body: 0, particle: 3 })));
    }

    #[test]
    fn broadphase_contracts() {
        let a = prim(0, 0, unit_tet(Vec3::zeros()));
        let b = prim(1, 0, unit_tet(Vec3::new(0.1, 0.1, 0.1)));
        let far = prim(1, 1, unit_tet(Vec3::new(30.0, 0.0, 0.0)));
        let same = prim(0, 1, unit_tet(Vec3::new(0.2, 0.0, 0.0)));
        assert_eq!(broadphase(&[a.clone(), b.clone()], 3.0, 0.0, |_, _| false), vec![(0, 1)]);
        assert!(broadphase(&[a.clone(), far], 3.0, 0.0, |_, _| false).is_empty());
        assert!(broadphase(&[a, same], 3.0, 0.0, |_, _| false).is_empty());
    }
}

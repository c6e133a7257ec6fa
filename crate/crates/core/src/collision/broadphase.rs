//! Uniform spatial hash over inflated tet bounding boxes.

use std::collections::HashMap;

use super::DeformedPrimitive;
use crate::math::Vec3;

fn aabb(p: &DeformedPrimitive, margin: f64) -> (Vec3, Vec3) {
    let mut lo = p.vertices[0];
    let mut hi = p.vertices[0];
    for v in &p.vertices[1..] {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (lo.add_scalar(-margin), hi.add_scalar(margin))
}

/// Bounding radius of a tet about its vertex centroid.
pub fn bounding_radius(p: &DeformedPrimitive) -> f64 {
    let c = p.vertices.iter().sum::<Vec3>() / 4.0;
    p.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
}

/// Candidate pairs `(i, j)`, `i < j`, of indices into `prims` whose
/// margin-inflated boxes share a hash cell. `skip(body_a, body_b)` filters
/// body pairs; same-body pairs are always dropped. The result is sorted.
pub fn broadphase(
    prims: &[DeformedPrimitive],
    cell_size: f64,
    margin: f64,
    skip: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    if prims.len() < 2 || !(cell_size > 0.0) {
        return Vec::new();
    }
    let cell = |x: f64| (x / cell_size).floor() as i64;
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (idx, p) in prims.iter().enumerate() {
        let (lo, hi) = aabb(p, margin);
        for i in cell(lo.x)..=cell(hi.x) {
            for j in cell(lo.y)..=cell(hi.y) {
                for k in cell(lo.z)..=cell(hi.z) {
                    cells.entry([i, j, k]).or_default().push(idx);
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for members in cells.values() {
        for (n, &i) in members.iter().enumerate() {
            for &j in &members[n + 1..] {
                let (bi, bj) = (prims[i].body_id, prims[j].body_id);
                if bi == bj || skip(bi, bj) {
                    continue;
                }
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// True when the margin-inflated boxes of two primitives overlap.
pub fn boxes_overlap(a: &DeformedPrimitive, b: &DeformedPrimitive, margin: f64) -> bool {
    let (alo, ahi) = aabb(a, 0.0);
    let (blo, bhi) = aabb(b, 0.0);
    (0..3).all(|k| alo[k] <= bhi[k] + margin && blo[k] <= ahi[k] + margin)
}

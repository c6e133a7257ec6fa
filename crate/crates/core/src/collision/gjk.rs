//! Distance between two convex point sets by GJK, with the closest point on
//! each simplex found by enumerating its faces.

use nalgebra::{Matrix3, Vector3};

use crate::math::Vec3;

#[derive(Debug, Clone, Copy)]
struct Vertex {
    w: Vec3,
    a: Vec3,
    b: Vec3,
}

/// Closest points between the hulls of `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest {
    pub distance: f64,
    pub point_a: Vec3,
    pub point_b: Vec3,
}

fn support(a: &[Vec3], b: &[Vec3], d: &Vec3) -> Vertex {
    let pa = *a.iter().max_by(|x, y| x.dot(d).total_cmp(&y.dot(d))).expect("non-empty");
    let pb = *b.iter().min_by(|x, y| x.dot(d).total_cmp(&y.dot(d))).expect("non-empty");
    Vertex { w: pa - pb, a: pa, b: pb }
}

/// Closest point to the origin on the hull of `pts` (at most 4), as
/// barycentric weights over a subset.
fn closest_on_simplex(pts: &[Vertex]) -> (Vec3, Vec<(usize, f64)>) {
    let n = pts.len();
    let mut best: Option<(f64, Vec3, Vec<(usize, f64)>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let Some(lambda) = affine_closest(pts, &idx) else { continue };
        if lambda.iter().any(|&l| l < 0.0) {
            continue;
        }
        let v: Vec3 = idx.iter().zip(&lambda).map(|(&i, &l)| pts[i].w * l).sum();
        let d = v.norm_squared();
        if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
            best = Some((d, v, idx.into_iter().zip(lambda).collect()));
        }
    }
    let (_, v, coords) = best.expect("single vertices are always valid");
    (v, coords)
}

/// Barycentric weights of the origin's projection onto the affine hull of
/// the selected points, or `None` when they are affinely dependent.
fn affine_closest(pts: &[Vertex], idx: &[usize]) -> Option<Vec<f64>> {
    let y0 = pts[idx[0]].w;
    let k = idx.len() - 1;
    if k == 0 {
        return Some(vec![1.0]);
    }
    let e: Vec<Vec3> = idx[1..].iter().map(|&i| pts[i].w - y0).collect();
    let mut m = Matrix3::<f64>::identity();
    let mut r = Vector3::<f64>::zeros();
    let mut scale: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = e[i].dot(&e[j]);
        }
        r[i] = -e[i].dot(&y0);
        scale = scale.max(m[(i, i)]);
    }
    let sub = m.view((0, 0), (k, k)).clone_owned();
    let det = sub.determinant();
    if det.abs() <= 1e-14 * scale.powi(k as i32) {
        return None;
    }
    let mu = sub.lu().solve(&r.rows(0, k).clone_owned())?;
    let mut lambda = Vec::with_capacity(k + 1);
    lambda.push(1.0 - mu.sum());
    lambda.extend(mu.iter());
    Some(lambda)
}

/// GJK distance between the convex hulls of two point sets. Returns a zero
/// distance when the hulls intersect.
pub fn distance(a: &[Vec3], b: &[Vec3]) -> Closest {
    let ca: Vec3 = a.iter().sum::<Vec3>() / a.len() as f64;
    let cb: Vec3 = b.iter().sum::<Vec3>() / b.len() as f64;
    let mut d = ca - cb;
    if d.norm_squared() == 0.0 {
        d = Vec3::x();
    }
    let mut simplex = vec![support(a, b, &(-d))];
    let mut v = simplex[0].w;
    let mut coords = vec![(0usize, 1.0)];

    for _ in 0..64 {
        let vv = v.norm_squared();
        if vv <= 1e-30 {
            break;
        }
        let w = support(a, b, &(-v));
        if vv - v.dot(&w.w) <= 1e-13 * vv || simplex.iter().any(|s| s.w == w.w) {
            break;
        }
        simplex.push(w);
        let (nv, nc) = closest_on_simplex(&simplex);
        if nv.norm_squared() >= vv {
            break;
        }
        simplex = nc.iter().map(|&(i, _)| simplex[i]).collect();
        coords = nc.iter().enumerate().map(|(k, &(_, l))| (k, l)).collect();
        v = nv;
        if simplex.len() == 4 {
            break;
        }
    }
    let point_a: Vec3 = coords.iter().map(|&(i, l)| simplex[i].a * l).sum();
    let point_b: Vec3 = coords.iter().map(|&(i, l)| simplex[i].b * l).sum();
    Closest { distance: v.norm(), point_a, point_b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_and_segments() {
        let a = [Vec3::new(0.0, 0.0, 2.0)];
        let b = [Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let c = distance(&a, &b);
        assert!((c.distance - 2.0).abs() < 1e-14);
        assert!(c.point_b.norm() < 1e-14);
    }

    #[test]
    fn overlapping_boxes_have_zero_distance() {
        let cube: Vec<Vec3> = (0..8).map(|c| Vec3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)).collect();
        let shifted: Vec<Vec3> = cube.iter().map(|p| p + Vec3::new(0.5, 0.5, 0.5)).collect();
        assert!(distance(&cube, &shifted).distance < 1e-12);
        let far: Vec<Vec3> = cube.iter().map(|p| p + Vec3::new(3.0, 0.0, 0.0)).collect();
        assert!((distance(&cube, &far).distance - 2.0).abs() < 1e-12);
    }
}

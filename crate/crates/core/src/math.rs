//! Small linear-algebra helpers shared across the pipeline.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rotation-variant SVD `F = U diag(sigma) V^T` with `det U = det V = +1`.
///
/// When `F` has a negative determinant the smallest singular value carries
/// the sign, so `U` and `V` stay proper rotations.
pub fn signed_svd(f: &Mat3) -> (Mat3, Vec3, Mat3) {
    let svd = f.svd(true, true);
    let mut u = svd.u.expect("svd requested u");
    let mut v = svd.v_t.expect("svd requested v_t").transpose();
    let mut sigma = svd.singular_values;

    // nalgebra does not guarantee an ordering; sort descending so the
    // reflection always lands on the smallest value.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let perm = |m: &Mat3| Mat3::from_columns(&[m.column(order[0]), m.column(order[1]), m.column(order[2])]);
    u = perm(&u);
    v = perm(&v);
    sigma = Vec3::new(sigma[order[0]], sigma[order[1]], sigma[order[2]]);

    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    (u, sigma, v)
}

/// Polar decomposition `F = R S` with `R` a proper rotation.
pub fn polar(f: &Mat3) -> (Mat3, Mat3) {
    let (u, sigma, v) = signed_svd(f);
    let r = u * v.transpose();
    let s = v * Mat3::from_diagonal(&sigma) * v.transpose();
    (r, s)
}

/// Deterministic right-handed tangent pair for a unit normal.
///
/// `t1 = normalize(n x e)` where `e` is the coordinate axis least aligned with
/// `n`; `t2 = n x t1`.
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let a = n.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = n.cross(&axis).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Frobenius norm of the difference, used by tolerance checks.
pub fn frob_dist(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).norm()
}

/// Skew matrix `[w]_x` such that `[w]_x y = w x y`.
pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Axial vector of the skew part: `axial(M)` returns `w` with `[w]_x = (M - M^T)/2`.
pub fn axial(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

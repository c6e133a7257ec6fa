//! Separating-axis test between two tetrahedra.

use crate::math::Vec3;

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
pub(super) const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Axis of least overlap, oriented from `b` toward `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatResult {
    /// Unit axis with `a` on its positive side.
    pub axis: Vec3,
    /// Overlap along `axis`; negative when the axis separates the tets.
    pub overlap: f64,
    /// Lower end of `a` and upper end of `b` along `axis`.
    pub a_min: f64,
    pub b_max: f64,
}

fn interval(t: &[Vec3; 4], d: &Vec3) -> (f64, f64) {
    t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let s = p.dot(d);
        (lo.min(s), hi.max(s))
    })
}

/// The 44 candidate axes: 4 + 4 face normals and 36 edge cross products,
/// skipping near-parallel edge pairs. Axes are unit length.
pub fn candidate_axes(a: &[Vec3; 4], b: &[Vec3; 4]) -> Vec<Vec3> {
    let mut axes = Vec::with_capacity(44);
    for t in [a, b] {
        for f in FACES {
            let n = (t[f[1]] - t[f[0]]).cross(&(t[f[2]] - t[f[0]]));
            if n.norm_squared() > 0.0 {
                axes.push(n.normalize());
            }
        }
    }
    for &(i, j) in &EDGES {
        let ea = a[j] - a[i];
        for &(k, l) in &EDGES {
            let eb = b[l] - b[k];
            let c = ea.cross(&eb);
            if c.norm_squared() > 1e-20 * ea.norm_squared() * eb.norm_squared() {
                axes.push(c.normalize());
            }
        }
    }
    axes
}

/// Candidate axes restricted to the surface of each tet: normals of
/// surface faces and cross products of edges that lie on a surface face.
/// A tet without surface faces contributes all of its faces and edges.
pub fn surface_axes(a: &[Vec3; 4], surface_a: &[bool; 4], b: &[Vec3; 4], surface_b: &[bool; 4]) -> Vec<Vec3> {
    let open = |s: &[bool; 4]| if s.iter().any(|&f| f) { *s } else { [true; 4] };
    let (sa, sb) = (open(surface_a), open(surface_b));
    // Edge (i, j) borders the two faces opposite its other two vertices.
    let on_surface = |s: &[bool; 4], (i, j): (usize, usize)| (0..4).any(|k| k != i && k != j && s[k]);
    let mut axes = Vec::with_capacity(44);
    for (t, s) in [(a, &sa), (b, &sb)] {
        for (f, _) in FACES.iter().zip(s).filter(|(_, &on)| on) {
            let n = (t[f[1]] - t[f[0]]).cross(&(t[f[2]] - t[f[0]]));
            if n.norm_squared() > 0.0 {
                axes.push(n.normalize());
            }
        }
    }
    for &ea_idx in EDGES.iter().filter(|&&e| on_surface(&sa, e)) {
        let ea = a[ea_idx.1] - a[ea_idx.0];
        for &(k, l) in EDGES.iter().filter(|&&e| on_surface(&sb, e)) {
            let eb = b[l] - b[k];
            let c = ea.cross(&eb);
            if c.norm_squared() > 1e-20 * ea.norm_squared() * eb.norm_squared() {
                axes.push(c.normalize());
            }
        }
    }
    axes
}

/// Minimum-overlap axis. A negative overlap means the tets are separated and
/// its magnitude is a lower bound on their distance.
pub fn least_overlap(a: &[Vec3; 4], b: &[Vec3; 4]) -> SatResult {
    least_overlap_along(a, b, &candidate_axes(a, b))
}

/// Minimum-overlap axis among `axes`.
pub fn least_overlap_along(a: &[Vec3; 4], b: &[Vec3; 4], axes: &[Vec3]) -> SatResult {
    let mut best = SatResult { axis: Vec3::z(), overlap: f64::INFINITY, a_min: 0.0, b_max: 0.0 };
    for &d in axes {
        let (a0, a1) = interval(a, &d);
        let (b0, b1) = interval(b, &d);
        // `a` above `b` along d, or `a` below `b` (then flip the axis).
        let up = b1 - a0;
        let down = a1 - b0;
        let cand = if up <= down {
            SatResult { axis: d, overlap: up, a_min: a0, b_max: b1 }
        } else {
            SatResult { axis: -d, overlap: down, a_min: -a1, b_max: -b0 }
        };
        if cand.overlap < best.overlap {
            best = cand;
        }
    }
    best
}

/// Vertices of `t` whose projection on `d` lies within `tol` of the minimum.
pub fn support_feature(t: &[Vec3; 4], d: &Vec3, tol: f64) -> Vec<Vec3> {
    let lo = t.iter().map(|p| p.dot(d)).fold(f64::INFINITY, f64::min);
    t.iter().filter(|p| p.dot(d) <= lo + tol).copied().collect()
}

//! Tetrahedral meshes: the minimal text format, validation and box generators.
//!
//! File layout (UTF-8):
//!
//! ```text
//! nv nt
//! x y z          (nv lines)
//! i0 i1 i2 i3    (nt lines, 0-based)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{MpmError, Result};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
}

pub fn signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

impl TetMesh {
    /// Checks indices, reorders every tet to positive volume and rejects
    /// flat ones.
    pub fn new(vertices: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        let mut mesh = Self { vertices, tets };
        mesh.canonicalize()?;
        Ok(mesh)
    }

    fn canonicalize(&mut self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tet) in self.tets.iter_mut().enumerate() {
            if let Some(&index) = tet.iter().find(|&&i| i >= n) {
                return Err(MpmError::Index { tet: t, index, vertex_count: n });
            }
            let [a, b, c, d] = tet.map(|i| self.vertices[i]);
            let vol = signed_volume(&a, &b, &c, &d);
            let edge = [b - a, c - a, d - a, c - b, d - b, d - c]
                .iter()
                .map(|e| e.norm())
                .fold(0.0, f64::max);
            if !vol.is_finite() || vol.abs() <= 1e-12 * edge.powi(3) {
                return Err(MpmError::Degenerate { tet: t });
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        Ok(())
    }

    pub fn tet_vertices(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.vertices[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_vertices(t);
        signed_volume(&a, &b, &c, &d)
    }

    /// Per tet, whether face `i` (the one opposite vertex `i`) is shared
    /// with no other tet and so lies on the mesh surface.
    pub fn surface_faces(&self) -> Vec<[bool; 4]> {
        let key = |tet: &[usize; 4], i: usize| {
            let mut f = [0; 3];
            let mut k = 0;
            for (j, &v) in tet.iter().enumerate() {
                if j != i {
                    f[k] = v;
                    k += 1;
                }
            }
            f.sort_unstable();
            f
        };
        let mut count: HashMap<[usize; 3], u32> = HashMap::new();
        for tet in &self.tets {
            for i in 0..4 {
                *count.entry(key(tet, i)).or_default() += 1;
            }
        }
        self.tets.iter().map(|tet| std::array::from_fn(|i| count[&key(tet, i)] == 1)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    /// Applies `x -> rotation * x + translation` to every vertex.
    pub fn transformed(&self, rotation: &Mat3, translation: &Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| rotation * v + translation).collect(),
            tets: self.tets.clone(),
        }
    }

    /// Concatenates two meshes into one.
    pub fn merged(&self, other: &TetMesh) -> Self {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut tets = self.tets.clone();
        tets.extend(other.tets.iter().map(|t| t.map(|i| i + offset)));
        Self { vertices, tets }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| MpmError::Parse { path: path.to_path_buf(), line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(ln, format!("bad header: {e}")))?;
        let &[nv, nt] = counts.as_slice() else {
            return Err(err(ln, "header must be `nv nt`".into()));
        };

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| err(ln, "missing vertex line".into()))?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(ln, format!("bad vertex: {e}")))?;
            let &[x, y, z] = xs.as_slice() else {
                return Err(err(ln, "vertex line must hold 3 floats".into()));
            };
            vertices.push(Vec3::new(x, y, z));
        }

        let mut tets = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| err(ln, "missing tet line".into()))?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(ln, format!("bad tet: {e}")))?;
            let &[a, b, c, d] = ids.as_slice() else {
                return Err(err(ln, "tet line must hold 4 indices".into()));
            };
            tets.push([a, b, c, d]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content after tets".into()));
        }
        Self::new(vertices, tets)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.tets.len());
        for v in &self.vertices {
            // `{:?}` prints the shortest representation that round-trips.
            let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &self.tets {
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        s
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    TetMesh::parse(&text, path)
}

pub fn write_mesh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh.to_text())?;
    Ok(())
}

/// Axis-aligned box of `cells` hexahedra starting at `min`, each split into
/// five tets. The split alternates with cell parity so neighbouring hexes
/// share faces conformingly.
pub fn box_mesh(cells: [usize; 3], min: Vec3, size: Vec3) -> TetMesh {
    let [nx, ny, nz] = cells;
    let h = Vec3::new(size.x / nx as f64, size.y / ny as f64, size.z / nz as f64);
    let vid = |i: usize, j: usize, k: usize| (i * (ny + 1) + j) * (nz + 1) + k;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            for k in 0..=nz {
                vertices.push(min + Vec3::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z));
            }
        }
    }

    // Corner numbering: c = dx + 2 dy + 4 dz.
    const EVEN: [[usize; 4]; 5] = [[1, 2, 4, 7], [0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7], [6, 2, 4, 7]];
    const ODD: [[usize; 4]; 5] = [[0, 3, 5, 6], [1, 0, 3, 5], [2, 0, 3, 6], [4, 0, 5, 6], [7, 3, 5, 6]];

    let mut tets = Vec::with_capacity(5 * nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let corner = |c: usize| vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let split = if (i + j + k) % 2 == 0 { &EVEN } else { &ODD };
                for t in split {
                    tets.push(t.map(corner));
                }
            }
        }
    }
    TetMesh::new(vertices, tets).expect("box mesh is valid by construction")
}

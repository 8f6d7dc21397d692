//! Tetrahedral meshes of the spherical shell between the body surface
//! and the outer wall.
//!
//! The shell is meshed by sweeping a subdivided icosahedron through
//! radial layers; every triangular prism between two layers is split
//! into three tetrahedra with diagonals chosen by global vertex index,
//! which makes the split conforming across prism boundaries.

use crate::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;

/// Conforming tetrahedral mesh of a spherical shell.
#[derive(Debug, Clone)]
pub struct ShellMesh {
    pub vertices: Vec<Vector3<f64>>,
    /// Positively oriented tetrahedra.
    pub tets: Vec<[usize; 4]>,
    /// Triangles on the body surface (inner boundary).
    pub inner_faces: Vec<[usize; 3]>,
    /// Triangles on the wall (outer boundary).
    pub outer_faces: Vec<[usize; 3]>,
    pub r_in: f64,
    pub r_out: f64,
    pub center: Vector3<f64>,
    pub level: usize,
}

/// Unit icosahedron subdivided `level` times; returns vertices on the
/// unit sphere and outward-oriented triangles.
fn icosphere(level: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let v = (vertices[a] + vertices[b]).normalize();
                vertices.push(v);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Signed volume of the tetrahedron spanned by four points.
pub fn tet_volume(p: [&Vector3<f64>; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

/// Splits the prism `(b0, b1, b2)` over `(t0, t1, t2)` into three
/// tetrahedra, with quad diagonals through each face's smallest global
/// vertex so adjacent prisms agree.
fn split_prism(b: [usize; 3], t: [usize; 3]) -> [[usize; 4]; 3] {
    // Rotate so the smallest of the six indices sits at bottom corner 0
    // (or directly above it).
    let mut order = [0, 1, 2];
    let mut best = 0;
    for k in 1..3 {
        if b[k].min(t[k]) < b[best].min(t[best]) {
            best = k;
        }
    }
    order.rotate_left(best);
    let (b, t) = if b[order[0]] <= t[order[0]] {
        (
            [b[order[0]], b[order[1]], b[order[2]]],
            [t[order[0]], t[order[1]], t[order[2]]],
        )
    } else {
        // Mirror through the mid plane; swapping one pair of columns
        // keeps the combinatorics of the quad faces intact.
        (
            [t[order[0]], t[order[2]], t[order[1]]],
            [b[order[0]], b[order[2]], b[order[1]]],
        )
    };
    let [v0, v1, v2] = b;
    let [v3, v4, v5] = t;
    // Both quads containing v0 take their diagonal through v0. The
    // remaining quad (v1, v2, v5, v4) goes through its smallest vertex.
    if v1.min(v5) < v2.min(v4) {
        [[v0, v1, v2, v5], [v0, v1, v5, v4], [v0, v4, v5, v3]]
    } else {
        [[v0, v1, v2, v4], [v0, v4, v2, v5], [v0, v4, v5, v3]]
    }
}

/// Builds the shell mesh at refinement `level`.
///
/// Level 0 is the plain icosahedron with two radial layers; every level
/// quadruples the spherical resolution and doubles the layer count, so
/// the element count grows by a factor of eight.
pub fn build_shell_mesh(
    level: usize,
    r_in: f64,
    r_out: f64,
    center: Vector3<f64>,
) -> Result<ShellMesh> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(Error::invalid("shell mesh requires 0 < r_in < r_out"));
    }
    if level > 5 {
        return Err(Error::invalid("mesh level capped at 5"));
    }
    let (sphere_vertices, sphere_faces) = icosphere(level);
    let layers = 2 * (1 << level);
    let n_sphere = sphere_vertices.len();

    let mut vertices = Vec::with_capacity((layers + 1) * n_sphere);
    for k in 0..=layers {
        let r = r_in + (r_out - r_in) * k as f64 / layers as f64;
        for v in &sphere_vertices {
            vertices.push(center + r * v);
        }
    }

    let mut tets = Vec::with_capacity(3 * layers * sphere_faces.len());
    for k in 0..layers {
        let lo = k * n_sphere;
        let hi = (k + 1) * n_sphere;
        for [a, b, c] in &sphere_faces {
            let bottom = [lo + a, lo + b, lo + c];
            let top = [hi + a, hi + b, hi + c];
            for mut tet in split_prism(bottom, top) {
                let vol = tet_volume([
                    &vertices[tet[0]],
                    &vertices[tet[1]],
                    &vertices[tet[2]],
                    &vertices[tet[3]],
                ]);
                if vol < 0.0 {
                    tet.swap(2, 3);
                }
                tets.push(tet);
            }
        }
    }

    let inner_faces = sphere_faces
        .iter()
        .map(|&[a, b, c]| [a, c, b]) // inward normal flipped to face the fluid
        .collect();
    let off = layers * n_sphere;
    let outer_faces = sphere_faces
        .iter()
        .map(|&[a, b, c]| [off + a, off + b, off + c])
        .collect();

    Ok(ShellMesh {
        vertices,
        tets,
        inner_faces,
        outer_faces,
        r_in,
        r_out,
        center,
        level,
    })
}

impl ShellMesh {
    /// Total mesh volume from the element volumes.
    pub fn volume(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| {
                tet_volume([
                    &self.vertices[t[0]],
                    &self.vertices[t[1]],
                    &self.vertices[t[2]],
                    &self.vertices[t[3]],
                ])
            })
            .sum()
    }

    /// Longest edge over all elements.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.tets {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    h = h.max((self.vertices[t[i]] - self.vertices[t[j]]).norm());
                }
            }
        }
        h
    }

    /// Vertex indices on the inner (body) boundary, sorted.
    pub fn inner_vertices(&self) -> Vec<usize> {
        Self::face_vertices(&self.inner_faces)
    }

    /// Vertex indices on the outer (wall) boundary, sorted.
    pub fn outer_vertices(&self) -> Vec<usize> {
        Self::face_vertices(&self.outer_faces)
    }

    fn face_vertices(faces: &[[usize; 3]]) -> Vec<usize> {
        let mut v: Vec<usize> = faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Unique element edges as sorted vertex pairs, in a stable order.
    pub fn unique_edges(&self) -> Vec<[usize; 2]> {
        let mut edges = Vec::with_capacity(self.tets.len() * 6);
        for t in &self.tets {
            for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
                edges.push([a, b]);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn icosphere_counts() {
        for level in 0..3 {
            let (v, f) = icosphere(level);
            assert_eq!(f.len(), 20 * 4_usize.pow(level as u32));
            assert_eq!(v.len(), 10 * 4_usize.pow(level as u32) + 2);
            for p in &v {
                assert!((p.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn element_counts_scale_by_eight() {
        let center = Vector3::zeros();
        let m0 = build_shell_mesh(0, 0.5, 2.0, center).unwrap();
        let m1 = build_shell_mesh(1, 0.5, 2.0, center).unwrap();
        assert_eq!(m0.tets.len(), 120);
        assert_eq!(m1.tets.len(), 8 * m0.tets.len());
    }

    #[test]
    fn all_tets_positively_oriented() {
        let m = build_shell_mesh(1, 0.5, 2.0, Vector3::new(0.1, 0.0, -0.2)).unwrap();
        for t in &m.tets {
            let vol = tet_volume([
                &m.vertices[t[0]],
                &m.vertices[t[1]],
                &m.vertices[t[2]],
                &m.vertices[t[3]],
            ]);
            assert!(vol > 1e-12, "degenerate or inverted tet, volume {vol}");
        }
    }

    #[test]
    fn mesh_is_conforming() {
        // Every interior triangular face must be shared by exactly two
        // tets, boundary faces by exactly one.
        let m = build_shell_mesh(1, 0.5, 2.0, Vector3::zeros()).unwrap();
        let mut count: HashMap<[usize; 3], usize> = HashMap::new();
        for t in &m.tets {
            for f in [
                [t[0], t[1], t[2]],
                [t[0], t[1], t[3]],
                [t[0], t[2], t[3]],
                [t[1], t[2], t[3]],
            ] {
                let mut f = f;
                f.sort_unstable();
                *count.entry(f).or_insert(0) += 1;
            }
        }
        let boundary: usize = count.values().filter(|&&c| c == 1).count();
        assert!(count.values().all(|&c| c <= 2));
        assert_eq!(boundary, m.inner_faces.len() + m.outer_faces.len());
        // Tagged boundary faces must be exactly the once-counted ones.
        for f in m.inner_faces.iter().chain(&m.outer_faces) {
            let mut f = *f;
            f.sort_unstable();
            assert_eq!(count.get(&f), Some(&1), "tagged face missing from elements");
        }
    }

    #[test]
    fn boundary_vertices_sit_on_spheres() {
        let center = Vector3::new(0.0, 0.3, 0.0);
        let m = build_shell_mesh(1, 0.5, 2.0, center).unwrap();
        for &v in &m.inner_vertices() {
            assert!(((m.vertices[v] - center).norm() - 0.5).abs() < 1e-12);
        }
        for &v in &m.outer_vertices() {
            assert!(((m.vertices[v] - center).norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_converges_to_shell_volume() {
        // Polyhedral approximation underestimates; error drops ~4x per
        // level.
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (2.0_f64.powi(3) - 0.5_f64.powi(3));
        let center = Vector3::zeros();
        let e: Vec<f64> = (0..3)
            .map(|l| (build_shell_mesh(l, 0.5, 2.0, center).unwrap().volume() - exact).abs())
            .collect();
        assert!(e[0] / e[1] > 3.0, "ratio {}", e[0] / e[1]);
        assert!(e[1] / e[2] > 3.5, "ratio {}", e[1] / e[2]);
        assert!(e[2] / exact < 0.05);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_shell_mesh(0, 0.0, 2.0, Vector3::zeros()).is_err());
        assert!(build_shell_mesh(0, 1.0, 0.5, Vector3::zeros()).is_err());
        assert!(build_shell_mesh(9, 0.5, 2.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn unique_edges_are_sorted_pairs() {
        let m = build_shell_mesh(0, 0.5, 2.0, Vector3::zeros()).unwrap();
        let edges = m.unique_edges();
        for e in &edges {
            assert!(e[0] < e[1]);
        }
        let mut copy = edges.clone();
        copy.dedup();
        assert_eq!(copy.len(), edges.len());
    }
}

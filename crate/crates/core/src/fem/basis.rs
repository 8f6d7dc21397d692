//! Lagrange bases on the reference tetrahedron.
//!
//! Barycentric coordinates: l0 = 1 - x - y - z, l1 = x, l2 = y, l3 = z.
//! The quadratic element has ten nodes: the four vertices followed by
//! the edge midpoints in the local edge order
//! (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).

use nalgebra::Vector3;

/// Local edge order shared with the mesh edge enumeration.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn barycentric(p: &Vector3<f64>) -> [f64; 4] {
    [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

/// Constant reference gradients of the barycentric coordinates.
const DL: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Linear basis: values and reference gradients at `p`.
pub fn p1_basis(p: &Vector3<f64>) -> ([f64; 4], [Vector3<f64>; 4]) {
    let l = barycentric(p);
    let grads = DL.map(Vector3::from);
    (l, grads)
}

/// Quadratic basis: values and reference gradients at `p`.
pub fn p2_basis(p: &Vector3<f64>) -> ([f64; 10], [Vector3<f64>; 10]) {
    let l = barycentric(p);
    let dl = DL.map(Vector3::from);
    let mut values = [0.0; 10];
    let mut grads = [Vector3::zeros(); 10];
    for i in 0..4 {
        values[i] = l[i] * (2.0 * l[i] - 1.0);
        grads[i] = dl[i] * (4.0 * l[i] - 1.0);
    }
    for (e, (i, j)) in LOCAL_EDGES.iter().enumerate() {
        values[4 + e] = 4.0 * l[*i] * l[*j];
        grads[4 + e] = 4.0 * (dl[*i] * l[*j] + dl[*j] * l[*i]);
    }
    (values, grads)
}

/// Reference coordinates of the ten quadratic nodes.
pub fn p2_nodes() -> [Vector3<f64>; 10] {
    let v = [
        Vector3::zeros(),
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
    ];
    let mut nodes = [Vector3::zeros(); 10];
    nodes[..4].copy_from_slice(&v);
    for (e, (i, j)) in LOCAL_EDGES.iter().enumerate() {
        nodes[4 + e] = 0.5 * (v[*i] + v[*j]);
    }
    nodes
}

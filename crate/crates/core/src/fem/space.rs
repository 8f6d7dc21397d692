//! The coupled velocity/pressure/rigid-body space on the shell mesh.
//!
//! Velocity is quadratic (vertex and edge-midpoint nodes), pressure
//! linear, which is inf-sup stable. Wall nodes are eliminated against
//! the no-slip condition; body-surface nodes are slaved to the six
//! rigid unknowns through `u = A + Omega x (y - q0)`, which is exact for
//! quadratic traces because the rigid field is affine. A single scalar
//! multiplier pins the pressure mean.
//!
//! Unknown layout: `[velocity | A | Omega | pressure | multiplier]`.

use super::basis::{p1_basis, p2_basis, LOCAL_EDGES};
use super::quadrature::TetRule;
use crate::mesh::ShellMesh;
use crate::rigid_motion::skew;
use nalgebra::{Matrix3, Vector3};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Interior unknown.
    Free,
    /// On the body surface, slaved to the rigid unknowns.
    Inner,
    /// On the wall, eliminated to zero.
    Outer,
}

/// Velocity of one node expressed in the unknown vector: the node value
/// is the sum of `block * z[col .. col + 3]` over the couplings.
#[derive(Debug, Clone, Copy)]
pub struct NodeCoupling {
    pub col: usize,
    pub block: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct CoupledSpace {
    pub mesh: ShellMesh,
    pub edges: Vec<[usize; 2]>,
    edge_index: HashMap<[usize; 2], usize>,
    /// Node positions: vertices first, then edge midpoints.
    pub node_pos: Vec<Vector3<f64>>,
    pub node_class: Vec<NodeClass>,
    /// Base of the three velocity components of each free node.
    pub vel_dof: Vec<Option<usize>>,
    pub n_vel: usize,
    /// Body center the rigid coupling refers to.
    pub q0: Vector3<f64>,
}

impl CoupledSpace {
    pub fn new(mesh: ShellMesh) -> Self {
        let edges = mesh.unique_edges();
        let edge_index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let n_verts = mesh.vertices.len();
        let mut node_pos = mesh.vertices.clone();
        node_pos.extend(edges.iter().map(|e| 0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]])));

        // Boundary membership from the tagged faces, not from vertex
        // distance: only edges lying in a boundary face are boundary.
        let face_edge_set = |faces: &[[usize; 3]]| -> (HashSet<usize>, HashSet<[usize; 2]>) {
            let mut verts = HashSet::new();
            let mut edges = HashSet::new();
            for f in faces {
                for &v in f {
                    verts.insert(v);
                }
                for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                    edges.insert([a.min(b), a.max(b)]);
                }
            }
            (verts, edges)
        };
        let (inner_verts, inner_edges) = face_edge_set(&mesh.inner_faces);
        let (outer_verts, outer_edges) = face_edge_set(&mesh.outer_faces);

        let n_nodes = node_pos.len();
        let mut node_class = vec![NodeClass::Free; n_nodes];
        for v in 0..n_verts {
            if inner_verts.contains(&v) {
                node_class[v] = NodeClass::Inner;
            } else if outer_verts.contains(&v) {
                node_class[v] = NodeClass::Outer;
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if inner_edges.contains(e) {
                node_class[n_verts + i] = NodeClass::Inner;
            } else if outer_edges.contains(e) {
                node_class[n_verts + i] = NodeClass::Outer;
            }
        }

        // Curved boundary: edge midpoints on a boundary surface move
        // radially onto the sphere, and the element geometry map
        // becomes the quadratic interpolant of its ten nodes. Interior
        // elements keep straight (affine) geometry exactly.
        for i in 0..edges.len() {
            let n = n_verts + i;
            let target = match node_class[n] {
                NodeClass::Inner => mesh.r_in,
                NodeClass::Outer => mesh.r_out,
                NodeClass::Free => continue,
            };
            let d = node_pos[n] - mesh.center;
            node_pos[n] = mesh.center + d * (target / d.norm());
        }

        let mut vel_dof = vec![None; n_nodes];
        let mut n_vel = 0;
        for (n, class) in node_class.iter().enumerate() {
            if *class == NodeClass::Free {
                vel_dof[n] = Some(n_vel);
                n_vel += 3;
            }
        }

        let q0 = mesh.center;
        CoupledSpace {
            mesh,
            edges,
            edge_index,
            node_pos,
            node_class,
            vel_dof,
            n_vel,
            q0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_pos.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.vertices.len()
    }

    /// Column base of the rigid translational unknown A.
    pub fn rigid_offset(&self) -> usize {
        self.n_vel
    }

    pub fn pressure_offset(&self) -> usize {
        self.n_vel + 6
    }

    pub fn multiplier_index(&self) -> usize {
        self.pressure_offset() + self.n_pressure()
    }

    pub fn n_total(&self) -> usize {
        self.multiplier_index() + 1
    }

    /// Couplings expressing the velocity of `node` in the unknowns.
    pub fn node_couplings(&self, node: usize) -> Vec<NodeCoupling> {
        match self.node_class[node] {
            NodeClass::Free => vec![NodeCoupling {
                col: self.vel_dof[node].unwrap(),
                block: Matrix3::identity(),
            }],
            NodeClass::Outer => Vec::new(),
            NodeClass::Inner => {
                let r = self.node_pos[node] - self.q0;
                vec![
                    NodeCoupling { col: self.rigid_offset(), block: Matrix3::identity() },
                    NodeCoupling { col: self.rigid_offset() + 3, block: -skew(&r) },
                ]
            }
        }
    }

    /// Global quadratic node ids of element `e`.
    pub fn element_nodes(&self, e: usize) -> [usize; 10] {
        let t = self.mesh.tets[e];
        let n_verts = self.mesh.vertices.len();
        let mut nodes = [0; 10];
        nodes[..4].copy_from_slice(&t);
        for (k, (i, j)) in LOCAL_EDGES.iter().enumerate() {
            let key = [t[*i].min(t[*j]), t[*i].max(t[*j])];
            nodes[4 + k] = n_verts + self.edge_index[&key];
        }
        nodes
    }

    /// Velocity values at all nodes for an unknown vector.
    pub fn node_velocities(&self, z: &[f64]) -> Vec<Vector3<f64>> {
        (0..self.n_nodes())
            .map(|n| {
                let mut u = Vector3::zeros();
                for c in self.node_couplings(n) {
                    u += c.block * Vector3::new(z[c.col], z[c.col + 1], z[c.col + 2]);
                }
                u
            })
            .collect()
    }

    /// Writes nodal values into the unknown vector: free nodes copy
    /// their value, the rigid part is set from `(a, omega)`. Boundary
    /// values on the wall are dropped.
    pub fn set_from_nodes(
        &self,
        values: &[Vector3<f64>],
        a: &Vector3<f64>,
        omega: &Vector3<f64>,
        z: &mut [f64],
    ) {
        for (n, v) in values.iter().enumerate() {
            if let Some(base) = self.vel_dof[n] {
                z[base] = v[0];
                z[base + 1] = v[1];
                z[base + 2] = v[2];
            }
        }
        let r = self.rigid_offset();
        for k in 0..3 {
            z[r + k] = a[k];
            z[r + 3 + k] = omega[k];
        }
    }
}

/// Precomputed basis data at one physical quadrature point.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Flat index across all elements and rule points.
    pub index: usize,
    pub pos: Vector3<f64>,
    pub weight: f64,
    pub phi: [f64; 10],
    /// Physical gradients of the quadratic basis.
    pub grad_phi: [Vector3<f64>; 10],
    pub psi: [f64; 4],
    pub grad_psi: [Vector3<f64>; 4],
}

/// Basis data for one element.
#[derive(Debug, Clone)]
pub struct ElemQuad {
    pub nodes: [usize; 10],
    pub verts: [usize; 4],
    pub points: Vec<QuadPoint>,
}

/// Quadrature cache over the whole mesh; the flat point index is the
/// key shared with the transform data.
#[derive(Debug, Clone)]
pub struct QuadCache {
    pub rule_degree: usize,
    pub elems: Vec<ElemQuad>,
    pub n_points: usize,
}

impl QuadCache {
    pub fn build(space: &CoupledSpace, rule: &TetRule) -> Self {
        let mut elems = Vec::with_capacity(space.mesh.tets.len());
        let mut index = 0;
        for (e, tet) in space.mesh.tets.iter().enumerate() {
            let nodes = space.element_nodes(e);
            let pos_k: [Vector3<f64>; 10] = nodes.map(|n| space.node_pos[n]);
            let mut points = Vec::with_capacity(rule.points.len());
            for (p_ref, w_ref) in rule.points.iter().zip(&rule.weights) {
                let (phi, grad_ref) = p2_basis(p_ref);
                let (psi, grad_ref_p1) = p1_basis(p_ref);
                // Quadratic geometry map x(xi) = sum_k phi_k pos_k;
                // reduces to the affine map on straight elements.
                let mut pos = Vector3::zeros();
                let mut jac = Matrix3::zeros();
                for k in 0..10 {
                    pos += phi[k] * pos_k[k];
                    jac += pos_k[k] * grad_ref[k].transpose();
                }
                let det = jac.determinant();
                let inv_t = jac.try_inverse().expect("degenerate element").transpose();
                points.push(QuadPoint {
                    index,
                    pos,
                    weight: w_ref * det.abs(),
                    phi,
                    grad_phi: grad_ref.map(|g| inv_t * g),
                    psi,
                    grad_psi: grad_ref_p1.map(|g| inv_t * g),
                });
                index += 1;
            }
            elems.push(ElemQuad { nodes, verts: *tet, points });
        }
        QuadCache { rule_degree: rule.degree, elems, n_points: index }
    }

    /// Physical positions of all points in flat order.
    pub fn positions(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.n_points);
        for e in &self.elems {
            out.extend(e.points.iter().map(|p| p.pos));
        }
        out
    }
}

/// Velocity value and gradient at every quadrature point.
pub fn eval_velocity(
    space: &CoupledSpace,
    cache: &QuadCache,
    z: &[f64],
) -> Vec<(Vector3<f64>, Matrix3<f64>)> {
    let nodal = space.node_velocities(z);
    let mut out = Vec::with_capacity(cache.n_points);
    for elem in &cache.elems {
        for p in &elem.points {
            let mut u = Vector3::zeros();
            let mut grad = Matrix3::zeros();
            for (k, &node) in elem.nodes.iter().enumerate() {
                let v = nodal[node];
                u += p.phi[k] * v;
                grad += v * p.grad_phi[k].transpose();
            }
            out.push((u, grad));
        }
    }
    out
}

/// Pressure value and gradient at every quadrature point.
pub fn eval_pressure(
    space: &CoupledSpace,
    cache: &QuadCache,
    z: &[f64],
) -> Vec<(f64, Vector3<f64>)> {
    let off = space.pressure_offset();
    let mut out = Vec::with_capacity(cache.n_points);
    for elem in &cache.elems {
        for p in &elem.points {
            let mut val = 0.0;
            let mut grad = Vector3::zeros();
            for (k, &v) in elem.verts.iter().enumerate() {
                val += p.psi[k] * z[off + v];
                grad += z[off + v] * p.grad_psi[k];
            }
            out.push((val, grad));
        }
    }
    out
}

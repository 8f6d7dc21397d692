//! Assembly of the coupled saddle-point blocks and of weak right-hand
//! sides given per-quadrature-point coefficient callbacks.
//!
//! All velocity blocks are reduced: wall rows and columns are gone and
//! body-surface nodes contribute to the six rigid unknowns through the
//! node couplings.

use super::space::{CoupledSpace, QuadCache};
use nalgebra::{Matrix3, Vector3};

/// Weighted velocity mass `int (W u) . v` with a pointwise weight
/// matrix; rows and columns span `[velocity | A | Omega]`.
pub fn assemble_mass(
    space: &CoupledSpace,
    cache: &QuadCache,
    weight: impl Fn(usize) -> Matrix3<f64>,
) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::new();
    let mut base = [[Matrix3::zeros(); 10]; 10];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for row in base.iter_mut() {
            for b in row.iter_mut() {
                *b = Matrix3::zeros();
            }
        }
        for p in &elem.points {
            let w_mat = weight(p.index) * p.weight;
            for a in 0..10 {
                if p.phi[a] == 0.0 {
                    continue;
                }
                for b in 0..10 {
                    let scale = p.phi[a] * p.phi[b];
                    if scale != 0.0 {
                        base[a][b] += w_mat * scale;
                    }
                }
            }
        }
        push_pair_blocks(&mut triplets, &couplings, &base);
    }
    triplets
}

/// Vector Laplacian `int grad u : grad v` on the reduced space.
pub fn assemble_stiffness(space: &CoupledSpace, cache: &QuadCache) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::new();
    let mut base = [[Matrix3::zeros(); 10]; 10];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for row in base.iter_mut() {
            for b in row.iter_mut() {
                *b = Matrix3::zeros();
            }
        }
        for p in &elem.points {
            for a in 0..10 {
                for b in 0..10 {
                    let scale = p.weight * p.grad_phi[a].dot(&p.grad_phi[b]);
                    if scale != 0.0 {
                        base[a][b] += Matrix3::identity() * scale;
                    }
                }
            }
        }
        push_pair_blocks(&mut triplets, &couplings, &base);
    }
    triplets
}

/// Symmetric viscous block `int 2 D u : D v` with
/// `D u = (grad u + grad u^T) / 2`; this is the form the momentum rows
/// use, so the matrix matches the flat part of the transformed weak
/// operator exactly.
pub fn assemble_sym_stiffness(space: &CoupledSpace, cache: &QuadCache) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::new();
    let mut base = [[Matrix3::zeros(); 10]; 10];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for row in base.iter_mut() {
            for b in row.iter_mut() {
                *b = Matrix3::zeros();
            }
        }
        for p in &elem.points {
            for a in 0..10 {
                let ga = p.grad_phi[a];
                for b in 0..10 {
                    let gb = p.grad_phi[b];
                    // 2 D(phi_b e_j) : grad(phi_a e_i)
                    //   = delta_ij grad phi_a . grad phi_b
                    //     + d_i phi_b d_j phi_a.
                    base[a][b] +=
                        (Matrix3::identity() * ga.dot(&gb) + gb * ga.transpose()) * p.weight;
                }
            }
        }
        push_pair_blocks(&mut triplets, &couplings, &base);
    }
    triplets
}

/// Divergence rows `int q div u`: one row per pressure vertex, columns
/// over the reduced velocity space.
pub fn assemble_divergence(space: &CoupledSpace, cache: &QuadCache) -> Vec<(usize, usize, f64)> {
    let off = space.pressure_offset();
    let mut triplets = Vec::new();
    let mut base = [[Vector3::zeros(); 10]; 4];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for row in base.iter_mut() {
            for b in row.iter_mut() {
                *b = Vector3::zeros();
            }
        }
        for p in &elem.points {
            for m in 0..4 {
                let scale = p.weight * p.psi[m];
                if scale == 0.0 {
                    continue;
                }
                for k in 0..10 {
                    // div u picks grad phi_k . u_k.
                    base[m][k] += p.grad_phi[k] * scale;
                }
            }
        }
        for (m, &vert) in elem.verts.iter().enumerate() {
            let row = off + vert;
            for (k, cks) in couplings.iter().enumerate() {
                for ck in cks {
                    let rowvec = base[m][k].transpose() * ck.block;
                    for c in 0..3 {
                        if rowvec[(0, c)] != 0.0 {
                            triplets.push((row, ck.col + c, rowvec[(0, c)]));
                        }
                    }
                }
            }
        }
    }
    triplets
}

/// Momentum-side pressure term `-int p div v`: velocity rows, pressure
/// columns.
pub fn assemble_pressure_gradient(
    space: &CoupledSpace,
    cache: &QuadCache,
) -> Vec<(usize, usize, f64)> {
    let off = space.pressure_offset();
    let mut triplets = Vec::new();
    let mut base = [[Vector3::zeros(); 10]; 4];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for row in base.iter_mut() {
            for b in row.iter_mut() {
                *b = Vector3::zeros();
            }
        }
        for p in &elem.points {
            for m in 0..4 {
                let scale = -p.weight * p.psi[m];
                if scale == 0.0 {
                    continue;
                }
                for k in 0..10 {
                    base[m][k] += p.grad_phi[k] * scale;
                }
            }
        }
        for (m, &vert) in elem.verts.iter().enumerate() {
            let col = off + vert;
            for (k, cks) in couplings.iter().enumerate() {
                for ck in cks {
                    let colvec = ck.block.transpose() * base[m][k];
                    for r in 0..3 {
                        if colvec[r] != 0.0 {
                            triplets.push((ck.col + r, col, colvec[r]));
                        }
                    }
                }
            }
        }
    }
    triplets
}

/// Mean-zero pressure constraint: symmetric coupling of every pressure
/// vertex to the single multiplier with weight `int psi_m`.
pub fn assemble_mean_constraint(space: &CoupledSpace, cache: &QuadCache) -> Vec<(usize, usize, f64)> {
    let off = space.pressure_offset();
    let mu = space.multiplier_index();
    let mut weights = vec![0.0; space.n_pressure()];
    for elem in &cache.elems {
        for p in &elem.points {
            for (m, &vert) in elem.verts.iter().enumerate() {
                weights[vert] += p.weight * p.psi[m];
            }
        }
    }
    let mut triplets = Vec::new();
    for (v, w) in weights.iter().enumerate() {
        triplets.push((off + v, mu, *w));
        triplets.push((mu, off + v, *w));
    }
    triplets
}

/// Adds the rigid body mass and inertia to the diagonal rigid blocks.
pub fn add_body_inertia(
    triplets: &mut Vec<(usize, usize, f64)>,
    space: &CoupledSpace,
    mass: f64,
    inertia: &Matrix3<f64>,
) {
    let r = space.rigid_offset();
    for k in 0..3 {
        triplets.push((r + k, r + k, mass));
    }
    for i in 0..3 {
        for j in 0..3 {
            if inertia[(i, j)] != 0.0 {
                triplets.push((r + 3 + i, r + 3 + j, inertia[(i, j)]));
            }
        }
    }
}

/// Weak load `int f . psi` for a pointwise vector field.
pub fn assemble_vector_rhs(
    space: &CoupledSpace,
    cache: &QuadCache,
    f: impl Fn(usize) -> Vector3<f64>,
) -> Vec<f64> {
    let mut rhs = vec![0.0; space.n_vel + 6];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for p in &elem.points {
            let fv = f(p.index) * p.weight;
            for (a, cas) in couplings.iter().enumerate() {
                if p.phi[a] == 0.0 {
                    continue;
                }
                for ca in cas {
                    let contrib = ca.block.transpose() * fv * p.phi[a];
                    for r in 0..3 {
                        rhs[ca.col + r] += contrib[r];
                    }
                }
            }
        }
    }
    rhs
}

/// Weak load `int M : grad psi` for a pointwise matrix flux
/// `M[(i, l)]`, pairing with `d psi_i / d x_l`.
pub fn assemble_gradient_rhs(
    space: &CoupledSpace,
    cache: &QuadCache,
    flux: impl Fn(usize) -> Matrix3<f64>,
) -> Vec<f64> {
    let mut rhs = vec![0.0; space.n_vel + 6];
    for elem in &cache.elems {
        let couplings: Vec<_> = elem.nodes.iter().map(|&n| space.node_couplings(n)).collect();
        for p in &elem.points {
            let m = flux(p.index) * p.weight;
            for (a, cas) in couplings.iter().enumerate() {
                for ca in cas {
                    let contrib = ca.block.transpose() * (m * p.grad_phi[a]);
                    for r in 0..3 {
                        rhs[ca.col + r] += contrib[r];
                    }
                }
            }
        }
    }
    rhs
}

fn push_block(triplets: &mut Vec<(usize, usize, f64)>, row: usize, col: usize, block: &Matrix3<f64>) {
    for i in 0..3 {
        for j in 0..3 {
            let v = block[(i, j)];
            if v != 0.0 {
                triplets.push((row + i, col + j, v));
            }
        }
    }
}

/// Emits the element-accumulated 3x3 pair blocks through the node
/// couplings, one push per element and node pair.
fn push_pair_blocks(
    triplets: &mut Vec<(usize, usize, f64)>,
    couplings: &[Vec<crate::fem::space::NodeCoupling>],
    base: &[[Matrix3<f64>; 10]; 10],
) {
    for (a, cas) in couplings.iter().enumerate() {
        for (b, cbs) in couplings.iter().enumerate() {
            let m = &base[a][b];
            if m.iter().all(|v| *v == 0.0) {
                continue;
            }
            for ca in cas {
                for cb in cbs {
                    let block = ca.block.transpose() * m * cb.block;
                    push_block(triplets, ca.col, cb.col, &block);
                }
            }
        }
    }
}

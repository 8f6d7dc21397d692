//! Thin wrappers around the sparse direct solver.

use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Sparse matrix assembled from (row, col, value) triplets; duplicate
/// entries are summed.
pub struct SparseSystem {
    pub n_rows: usize,
    pub n_cols: usize,
    pub matrix: SparseColMat<usize, f64>,
}

impl SparseSystem {
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let trips: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let matrix = SparseColMat::try_new_from_triplets(n_rows, n_cols, &trips)
            .map_err(|e| Error::SolverFailure(format!("sparse assembly failed: {e:?}")))?;
        Ok(SparseSystem { n_rows, n_cols, matrix })
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let xm = Mat::from_fn(self.n_cols, 1, |i, _| x[i]);
        let ym = &self.matrix * &xm;
        (0..self.n_rows).map(|i| ym[(i, 0)]).collect()
    }

    /// LU factorization for repeated solves.
    pub fn factorize(&self) -> Result<Factorized> {
        if self.n_rows != self.n_cols {
            return Err(Error::SolverFailure("cannot factorize a non-square system".into()));
        }
        let lu = self
            .matrix
            .sp_lu()
            .map_err(|e| Error::SolverFailure(format!("sparse LU failed: {e:?}")))?;
        Ok(Factorized { n: self.n_rows, lu })
    }
}

/// Reusable LU factorization.
pub struct Factorized {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl Factorized {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

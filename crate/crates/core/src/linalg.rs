//! Direct solvers backed by `faer`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Sparse LU factorization of a square system.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Config(format!("invalid sparse matrix: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let t: Vec<_> = a.triplets().collect();
        Self::from_triplets(a.nrows(), &t)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Dense LU with partial pivoting, for the small coarsest-level systems.
pub struct DenseLu {
    n: usize,
    lu: PartialPivLu<f64>,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("n", &self.n).finish()
    }
}

impl DenseLu {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut mat = Mat::<f64>::zeros(n, n);
        for &(i, j, v) in triplets {
            mat[(i, j)] += v;
        }
        let lu = mat.partial_piv_lu();
        let out = DenseLu { n, lu };
        // A zero pivot shows up as non-finite entries in any solve.
        let probe = out.solve(&vec![1.0; n]);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("{n}x{n} dense system")));
        }
        Ok(out)
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let t: Vec<_> = a.triplets().collect();
        Self::from_triplets(a.nrows(), &t)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Eigenvalues of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| rows[i][j]);
    let mut eigs = mat
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Singular(format!("eigensolver failed: {e:?}")))?;
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

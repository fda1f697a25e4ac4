//! Dense symmetric eigendecomposition and SVD, backed by faer.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors of a
/// symmetric matrix. Only the lower triangle is read.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::invalid(format!("symmetric eigensolver failed: {e:?}")))?;
    let s: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    let order = descending(&s);
    let values = DVector::from_iterator(n, order.iter().map(|&i| s[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok((values, vectors))
}

/// `M = U diag(σ) Vᵀ` with σ descending. Returns `(U, σ, Vᵀ)`.
pub(crate) fn svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("SVD expects a square matrix"));
    }
    let svd = to_faer(m)
        .svd()
        .map_err(|e| Error::invalid(format!("SVD failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let (u, v) = (svd.U(), svd.V());
    let order = descending(&s);
    let sigma = DVector::from_iterator(n, order.iter().map(|&i| s[i]));
    let u_out = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(n, n, |r, c| v[(c, order[r])]);
    Ok((u_out, sigma, v_t))
}

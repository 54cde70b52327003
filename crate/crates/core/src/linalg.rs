//! Dense decompositions backed by `faer`, exposed on `nalgebra` matrices.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

pub(crate) fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) Vᵀ`; returns `(U, s, V)`.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (
            DMatrix::zeros(m.nrows(), 0),
            DVector::zeros(0),
            DMatrix::zeros(m.ncols(), 0),
        );
    }
    let svd = to_faer(m)
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    (
        DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(v.nrows(), k, |i, j| v[(i, j)]),
    )
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return DVector::zeros(0);
    }
    let s = to_faer(m)
        .singular_values()
        .expect("SVD of a finite matrix converges");
    DVector::from_vec(s)
}

/// Largest eigenvalue modulus of a square matrix.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let ev = to_faer(m)
        .eigenvalues()
        .expect("eigenvalues of a finite matrix converge");
    ev.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

//! Small dense complex linear-algebra helpers shared by the modules.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Cholesky, Diag, Eigh, SolveTriangular, UPLO};

use crate::{Error, Result, C64};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// Conjugate transpose.
pub fn hermitian(a: ArrayView2<C64>) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn frobenius_sq(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Solves `(A) X = B` for Hermitian positive-definite `A` by Cholesky.
///
/// Fails with [`Error::RankDeficient`] when the factorization breaks down or a
/// pivot falls below `1e-13` of the largest one.
pub fn hpd_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let l = a
        .cholesky(UPLO::Lower)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let pivots: Vec<f64> = l.diag().iter().map(|z| z.re * z.re).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < 1e-13 * max {
        return Err(Error::RankDeficient(format!(
            "pivot ratio {:.3e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    let y = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, b)
        .map_err(|e| Error::Linalg(e.to_string()))?;
    hermitian(l.view())
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &y)
        .map_err(|e| Error::Linalg(e.to_string()))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    // LAPACK sees a row-major buffer as the transpose, which for a Hermitian
    // matrix conjugates the eigenvectors. Hand it column-major storage.
    let mut fortran = Array2::zeros(a.raw_dim().f());
    fortran.assign(a);
    fortran
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(e.to_string()))
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues within
/// `-1e-12` of zero are clamped; anything more negative is an error.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(a)?;
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        if v < -1e-12 * scale {
            return Err(Error::Linalg(format!("matrix is not PSD (eigenvalue {v:.3e})")));
        }
        let s = v.max(0.0).sqrt();
        scaled.column_mut(j).mapv_inplace(|z| z * s);
    }
    Ok(scaled.dot(&hermitian(vecs.view())))
}

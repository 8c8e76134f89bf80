//! Small dense linear-algebra helpers shared by the filter, smoother and oracles.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m, what)?.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    symmetrize(m).symmetric_eigenvalues().iter().copied().collect()
}

/// Accepts a symmetric matrix whose eigenvalues are all above `-rel_tol * trace`.
pub fn check_psd(m: &DMatrix<f64>, rel_tol: f64, what: &str) -> Result<()> {
    let n = m.nrows();
    if n == 0 {
        return Ok(());
    }
    let trace = m.trace().abs();
    let shift = rel_tol * trace.max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;
    let shifted = m + DMatrix::identity(n, n) * shift;
    Cholesky::new(shifted)
        .map(|_| ())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Frobenius norm of `a - b` relative to the Frobenius norm of `b`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

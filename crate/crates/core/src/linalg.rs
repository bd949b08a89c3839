//! Small dense-matrix helpers shared by the estimator and the checks.

use crate::{CMatrix, C64};

/// Largest entrywise `|M[i,j] - conj(M[j,i])|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` by `(m + mᴴ)/2` in place and returns the correction applied.
pub fn hermitize(m: &mut CMatrix) -> f64 {
    let defect = hermitian_defect(m);
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    defect
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise difference magnitude between two equally sized matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Real part of the trace.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Diagonal matrix from a vector.
pub fn diag(v: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

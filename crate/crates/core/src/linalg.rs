use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Largest jitter, relative to the mean diagonal, tried before giving up.
pub const MAX_RELATIVE_JITTER: f64 = 1e-4;

/// Cholesky factor of `matrix + jitter·I`, escalating the jitter tenfold
/// from `relative_jitter · mean(diag)` until the factorisation succeeds.
///
/// Returns the factor and the absolute jitter that was added.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>, relative_jitter: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = matrix.nrows();
    let scale = if n == 0 { 1.0 } else { (matrix.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE) };
    let mut rel = relative_jitter.max(0.0);
    loop {
        let jitter = rel * scale;
        let mut m = matrix.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        if rel >= MAX_RELATIVE_JITTER {
            return Err(Error::Cholesky { jitter });
        }
        rel = if rel == 0.0 { 1e-12 } else { (rel * 10.0).min(MAX_RELATIVE_JITTER) };
    }
}

/// `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero.
pub fn clip_to_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    symmetrize(&mut out);
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_matrix() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let (chol, jitter) = cholesky_with_jitter(&m, 0.0).unwrap();
        assert!(jitter > 0.0);
        let back = chol.l() * chol.l().transpose();
        assert!((back[(0, 0)] - 1.0 - jitter).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_with_jitter(&m, 1e-8), Err(Error::Cholesky { .. })));
    }

    #[test]
    fn psd_clip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let c = clip_to_psd(&m);
        assert!(min_eigenvalue(&c) > -1e-12);
    }
}

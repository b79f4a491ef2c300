//! Gaussian summaries used by the track pruner and the particle metrics.

use nalgebra::{Cholesky, SMatrix};

/// Natural log of the determinant of a symmetric positive definite matrix.
///
/// Returns `None` when the Cholesky factorization fails (singular or
/// indefinite input).
pub fn log_det_spd<const K: usize>(m: &SMatrix<f64, K, K>) -> Option<f64> {
    let chol = Cholesky::new(*m)?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..K {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// `k/2 + (k/2) ln(2π) + ½ ln|Σ|`, or `-∞` when `Σ` is singular.
pub fn gaussian_entropy<const K: usize>(sigma: &SMatrix<f64, K, K>) -> f64 {
    match log_det_spd(sigma) {
        Some(ld) => entropy_from_log_det(K, ld),
        None => f64::NEG_INFINITY,
    }
}

pub fn entropy_from_log_det(k: usize, log_det: f64) -> f64 {
    let k = k as f64;
    0.5 * k * (1.0 + (2.0 * std::f64::consts::PI).ln()) + 0.5 * log_det
}

pub fn is_symmetric<const K: usize>(m: &SMatrix<f64, K, K>, rel_tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= rel_tol * scale
}

pub fn symmetrize<const K: usize>(m: &SMatrix<f64, K, K>) -> SMatrix<f64, K, K> {
    (m + m.transpose()) * 0.5
}

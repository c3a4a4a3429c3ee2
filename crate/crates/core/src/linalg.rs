use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Cholesky factorization with escalating diagonal jitter.
///
/// Starts at `base_jitter` and multiplies by 10 until either the
/// factorization succeeds or the jitter exceeds `max_jitter`. Returns the
/// factor together with the jitter that was actually applied.
pub fn cholesky_with_jitter(
    mat: &DMatrix<f64>,
    base_jitter: f64,
    max_jitter: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = mat.nrows();
    let mut jitter = base_jitter;
    loop {
        let mut work = mat.clone();
        for i in 0..n {
            work[(i, i)] += jitter;
        }
        if let Some(chol) = work.cholesky() {
            return Ok((chol, jitter));
        }
        jitter = if jitter > 0.0 { jitter * 10.0 } else { 1e-14 };
        if jitter > max_jitter {
            let max_entry = mat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            return Err(Error::numerical(format!(
                "Cholesky failed for {n}x{n} matrix after jitter escalation to {max_jitter:e} \
                 (max entry {max_entry:e})"
            )));
        }
    }
}

/// `log det` of the factored matrix, as twice the sum of log diagonal
/// entries of the factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

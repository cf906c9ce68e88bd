use nalgebra::DMatrix;

use crate::error::{IlsError, Result};
use crate::linalg::spd_logdet;

/// Stein (Jensen-Bregman log-det) divergence
/// `log det((P + Q) / 2) - (log det P + log det Q) / 2`.
///
/// Symmetric in its arguments, zero iff `P = Q`, and invariant under
/// congruence `P -> A P A^T` for invertible `A`. Round-off negatives are
/// clamped to zero.
pub fn stein_divergence(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != q.shape() || !p.is_square() {
        return Err(IlsError::shape("stein divergence", format!("{:?}", p.shape()), format!("{:?}", q.shape())));
    }
    let mid = (p + q) * 0.5;
    let value = spd_logdet(&mid, "stein divergence")?
        - 0.5 * (spd_logdet(p, "stein divergence")? + spd_logdet(q, "stein divergence")?);
    Ok(value.max(0.0))
}

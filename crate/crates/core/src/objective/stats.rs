use nalgebra::{DMatrix, DVector};

use crate::error::{IlsError, Result};
use crate::linalg::{sym, SymEigen};

/// Relative ridge added to empirical covariances: `1e-6 * trace / dim`.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// First and second order statistics of both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainStats {
    pub mean_s: DVector<f64>,
    pub mean_t: DVector<f64>,
    pub sigma_s: DMatrix<f64>,
    pub sigma_t: DMatrix<f64>,
}

impl DomainStats {
    /// Statistics of two sample matrices (rows are samples).
    pub fn from_samples(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Self> {
        let (mean_s, sigma_s) = mean_and_covariance(source)?;
        let (mean_t, sigma_t) = mean_and_covariance(target)?;
        Ok(DomainStats {
            mean_s,
            mean_t,
            sigma_s,
            sigma_t,
        })
    }
}

/// Column means and the ridged `1/(n-1)` covariance of a sample matrix.
pub fn mean_and_covariance(x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, d) = x.shape();
    if n < 2 || d == 0 {
        return Err(IlsError::Config(format!(
            "covariance needs at least 2 samples and 1 feature, got {n} x {d}"
        )));
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = sym(&(centered.transpose() * &centered / (n - 1) as f64));
    let ridge = COVARIANCE_RIDGE * cov.trace() / d as f64;
    if !(ridge > 0.0) {
        return Err(IlsError::Config("covariance of constant data is zero".into()));
    }
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    SymEigen::spd(&cov, "domain covariance")?;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbiased_normalization_with_ridge() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let (mean, cov) = mean_and_covariance(&x).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_becomes_spd() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let (_, cov) = mean_and_covariance(&x).unwrap();
        assert!(SymEigen::new(&cov).min() > 0.0);
    }

    #[test]
    fn too_few_samples() {
        assert!(mean_and_covariance(&DMatrix::zeros(1, 3)).is_err());
        assert!(mean_and_covariance(&DMatrix::zeros(4, 3)).is_err());
    }
}

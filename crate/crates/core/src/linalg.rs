//! Dense symmetric matrix helpers shared by the manifold and objective code.
//!
//! All symmetric matrix functions go through an eigendecomposition of the
//! explicitly symmetrized input, so round-off asymmetry never leaks into
//! square roots, exponentials or log-determinants.

use nalgebra::{DMatrix, DVector};

use crate::error::{IlsError, Result};

/// Relative eigenvalue floor below which a matrix is not accepted as SPD.
pub const SPD_RELATIVE_FLOOR: f64 = 1e-12;

/// `(A + A^T) / 2`.
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `A - A^T`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let (n, m) = a.shape();
    if n != m {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let eig = sym(a).symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        SymEigen { values, vectors }
    }

    /// Same as [`SymEigen::new`], but fails unless the matrix passes the SPD
    /// conditioning test.
    pub fn spd(a: &DMatrix<f64>, context: &'static str) -> Result<Self> {
        let eig = Self::new(a);
        eig.check_spd(context)?;
        Ok(eig)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_spd(&self, context: &'static str) -> Result<()> {
        let (min_eig, max_eig) = (self.min(), self.max());
        if !(min_eig.is_finite() && max_eig.is_finite())
            || max_eig <= 0.0
            || min_eig <= SPD_RELATIVE_FLOOR * max_eig
        {
            return Err(IlsError::Conditioning {
                context,
                min_eig,
                max_eig,
            });
        }
        Ok(())
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        sym(&(scaled * self.vectors.transpose()))
    }
}

pub fn spd_sqrt(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    Ok(SymEigen::spd(a, context)?.map(f64::sqrt))
}

pub fn spd_inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    Ok(SymEigen::spd(a, context)?.map(|l| 1.0 / l))
}

pub fn spd_logdet(a: &DMatrix<f64>, context: &'static str) -> Result<f64> {
    Ok(SymEigen::spd(a, context)?.values.iter().map(|l| l.ln()).sum())
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    SymEigen::new(a).map(f64::exp)
}

/// Orthonormal factor `A (A^T A)^{-1/2}` of a tall matrix, computed as `U V^T`
/// from the thin SVD.
pub fn unitary_factor(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let (n, p) = a.shape();
    if p > n {
        return Err(IlsError::shape(context, format!("rows >= {p}"), format!("{n} rows")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(IlsError::Singular { context });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if smax <= 0.0 || smin <= smax * f64::EPSILON * n as f64 {
        return Err(IlsError::Singular { context });
    }
    let u = svd.u.ok_or(IlsError::Singular { context })?;
    let v_t = svd.v_t.ok_or(IlsError::Singular { context })?;
    Ok(u * v_t)
}

/// Frobenius norm of `W^T W - I`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let p = w.ncols();
    (w.transpose() * w - DMatrix::<f64>::identity(p, p)).norm()
}

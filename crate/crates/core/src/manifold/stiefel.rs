use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IlsError, Result};
use crate::linalg::{orthonormality_error, sym, unitary_factor};

/// A point on St(n, p): an `n x p` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    w: DMatrix<f64>,
}

impl StiefelPoint {
    /// Default bound on `|W^T W - I|_F`.
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(w, Self::DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(w: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        let (n, p) = w.shape();
        if p == 0 || p > n {
            return Err(IlsError::shape("stiefel point", format!("0 < p <= n = {n}"), format!("p = {p}")));
        }
        let err = orthonormality_error(&w);
        if !(err <= tolerance) {
            return Err(IlsError::NotOrthonormal(err));
        }
        Ok(StiefelPoint { w })
    }

    /// Orthonormal factor of an arbitrary full-rank tall matrix.
    pub fn from_unitary_factor(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(unitary_factor(a, "stiefel projection")?)
    }

    /// Leading `p` columns of the identity.
    pub fn identity(n: usize, p: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, p))
    }

    /// Random point drawn as the orthonormal factor of a Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Self> {
        let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::from_unitary_factor(&g)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.w
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Number of columns `p`.
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.w)
    }

    fn check_shape(&self, m: &DMatrix<f64>, context: &'static str) -> Result<()> {
        if m.shape() != self.w.shape() {
            return Err(IlsError::shape(context, format!("{:?}", self.w.shape()), format!("{:?}", m.shape())));
        }
        Ok(())
    }

    /// Projects a Euclidean gradient onto the tangent space: `G - W sym(W^T G)`.
    pub fn egrad_to_rgrad(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(g, "stiefel gradient")?;
        Ok(g - &self.w * sym(&(self.w.transpose() * g)))
    }

    /// `|sym(W^T xi)|_F`, zero for tangent vectors.
    pub fn tangency_error(&self, xi: &DMatrix<f64>) -> f64 {
        sym(&(self.w.transpose() * xi)).norm()
    }

    /// Retraction `uf(W + xi)`.
    pub fn retract(&self, xi: &DMatrix<f64>) -> Result<Self> {
        self.check_shape(xi, "stiefel retraction")?;
        Self::new(unitary_factor(&(&self.w + xi), "stiefel retraction")?)
    }

    /// Frobenius inner product of two tangent vectors.
    pub fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.dot(b)
    }
}

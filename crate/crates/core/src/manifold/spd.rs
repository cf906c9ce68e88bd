use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IlsError, Result};
use crate::linalg::{asymmetry, sym, SymEigen};

/// A symmetric positive definite `p x p` matrix.
///
/// Construction enforces symmetry to `1e-12` (the stored matrix is the
/// symmetrized input) and the relative eigenvalue floor from
/// [`crate::linalg::SPD_RELATIVE_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPoint {
    m: DMatrix<f64>,
}

impl SpdPoint {
    pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(IlsError::shape("spd point", "square matrix", format!("{:?}", m.shape())));
        }
        let asym = asymmetry(&m);
        if !(asym <= Self::SYMMETRY_TOLERANCE) {
            return Err(IlsError::NotSymmetric(asym));
        }
        let m = sym(&m);
        SymEigen::spd(&m, "spd point")?;
        Ok(SpdPoint { m })
    }

    pub fn identity(p: usize) -> Self {
        SpdPoint {
            m: DMatrix::identity(p, p),
        }
    }

    /// Random SPD matrix `A A^T / p + shift I` from a Gaussian `A`.
    pub fn random<R: Rng + ?Sized>(p: usize, shift: f64, rng: &mut R) -> Result<Self> {
        let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::new(sym(&(&a * a.transpose() / p as f64)) + DMatrix::identity(p, p) * shift)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn eigen(&self) -> SymEigen {
        SymEigen::new(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.eigen().map(f64::sqrt)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.eigen().map(|l| 1.0 / l)
    }

    fn check_shape(&self, g: &DMatrix<f64>, context: &'static str) -> Result<()> {
        if g.shape() != self.m.shape() {
            return Err(IlsError::shape(context, format!("{:?}", self.m.shape()), format!("{:?}", g.shape())));
        }
        Ok(())
    }

    /// Riemannian gradient under the affine-invariant metric: `M sym(G) M`.
    pub fn egrad_to_rgrad(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(g, "spd gradient")?;
        Ok(sym(&(&self.m * sym(g) * &self.m)))
    }

    /// Exponential-map retraction `M^1/2 expm(M^-1/2 xi M^-1/2) M^1/2`.
    pub fn retract(&self, xi: &DMatrix<f64>) -> Result<Self> {
        self.check_shape(xi, "spd retraction")?;
        let asym = asymmetry(xi);
        if !(asym <= Self::SYMMETRY_TOLERANCE * xi.amax().max(1.0)) {
            return Err(IlsError::NotSymmetric(asym));
        }
        let eig = self.eigen();
        let root = eig.map(f64::sqrt);
        let inv_root = eig.map(|l| 1.0 / l.sqrt());
        let inner = SymEigen::new(&(&inv_root * sym(xi) * &inv_root));
        // M^1/2 V e^(L/2), so the result is formed as a Gram matrix
        let half = DMatrix::from_fn(inner.vectors.nrows(), inner.vectors.ncols(), |i, j| {
            inner.vectors[(i, j)] * (0.5 * inner.values[j]).exp()
        });
        let factor = root * half;
        Self::new(sym(&(&factor * factor.transpose())))
    }

    /// Affine-invariant inner product `tr(M^-1 a M^-1 b)`.
    pub fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let inv = self.inverse();
        (&inv * a * &inv).dot(&b.transpose())
    }
}

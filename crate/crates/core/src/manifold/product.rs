use std::ops::{Add, Mul, Neg};

use nalgebra::{DMatrix, DVector};

use super::{SpdPoint, StiefelPoint};
use crate::error::{IlsError, Result};

/// One factor of the product manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    SourceProjection,
    TargetProjection,
    Metric,
    Slack,
}

impl Block {
    /// Fixed update order used by the alternating optimizer.
    pub const ALL: [Block; 4] = [
        Block::SourceProjection,
        Block::TargetProjection,
        Block::Metric,
        Block::Slack,
    ];
}

/// Matrices shaped like the four factors of a [`ProductPoint`].
///
/// Holds Euclidean gradients as well as tangent vectors; only the latter
/// satisfy the tangency conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBundle {
    pub xi_s: DMatrix<f64>,
    pub xi_t: DMatrix<f64>,
    pub xi_m: DMatrix<f64>,
    pub xi_v: DVector<f64>,
}

impl TangentBundle {
    pub fn zeros(s: usize, t: usize, p: usize, n_pairs: usize) -> Self {
        TangentBundle {
            xi_s: DMatrix::zeros(s, p),
            xi_t: DMatrix::zeros(t, p),
            xi_m: DMatrix::zeros(p, p),
            xi_v: DVector::zeros(n_pairs),
        }
    }

    pub fn zeros_at(point: &ProductPoint) -> Self {
        Self::zeros(
            point.ws.ambient_dim(),
            point.wt.ambient_dim(),
            point.latent_dim(),
            point.pair_count(),
        )
    }

    /// Copy with every factor except `block` set to zero.
    pub fn restricted_to(&self, block: Block) -> Self {
        let mut out = TangentBundle {
            xi_s: DMatrix::zeros(self.xi_s.nrows(), self.xi_s.ncols()),
            xi_t: DMatrix::zeros(self.xi_t.nrows(), self.xi_t.ncols()),
            xi_m: DMatrix::zeros(self.xi_m.nrows(), self.xi_m.ncols()),
            xi_v: DVector::zeros(self.xi_v.len()),
        };
        match block {
            Block::SourceProjection => out.xi_s.copy_from(&self.xi_s),
            Block::TargetProjection => out.xi_t.copy_from(&self.xi_t),
            Block::Metric => out.xi_m.copy_from(&self.xi_m),
            Block::Slack => out.xi_v.copy_from(&self.xi_v),
        }
        out
    }

    /// Euclidean (Frobenius) inner product, ignoring the point's geometry.
    pub fn euclidean_dot(&self, other: &Self) -> f64 {
        self.xi_s.dot(&other.xi_s) + self.xi_t.dot(&other.xi_t) + self.xi_m.dot(&other.xi_m) + self.xi_v.dot(&other.xi_v)
    }

    pub fn is_zero(&self) -> bool {
        self.xi_s.iter()
            .chain(self.xi_t.iter())
            .chain(self.xi_m.iter())
            .chain(self.xi_v.iter())
            .all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.xi_s.iter()
            .chain(self.xi_t.iter())
            .chain(self.xi_m.iter())
            .chain(self.xi_v.iter())
            .all(|x| x.is_finite())
    }
}

impl Mul<f64> for &TangentBundle {
    type Output = TangentBundle;

    fn mul(self, alpha: f64) -> TangentBundle {
        TangentBundle {
            xi_s: &self.xi_s * alpha,
            xi_t: &self.xi_t * alpha,
            xi_m: &self.xi_m * alpha,
            xi_v: &self.xi_v * alpha,
        }
    }
}

impl Add for &TangentBundle {
    type Output = TangentBundle;

    fn add(self, rhs: &TangentBundle) -> TangentBundle {
        TangentBundle {
            xi_s: &self.xi_s + &rhs.xi_s,
            xi_t: &self.xi_t + &rhs.xi_t,
            xi_m: &self.xi_m + &rhs.xi_m,
            xi_v: &self.xi_v + &rhs.xi_v,
        }
    }
}

impl Neg for &TangentBundle {
    type Output = TangentBundle;

    fn neg(self) -> TangentBundle {
        self * -1.0
    }
}

/// A point `(W_s, W_t, M, v)` on `St(s,p) x St(t,p) x SPD(p) x R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub ws: StiefelPoint,
    pub wt: StiefelPoint,
    pub m: SpdPoint,
    pub v: DVector<f64>,
}

impl ProductPoint {
    pub fn new(ws: StiefelPoint, wt: StiefelPoint, m: SpdPoint, v: DVector<f64>) -> Result<Self> {
        let p = m.dim();
        if ws.dim() != p || wt.dim() != p {
            return Err(IlsError::shape(
                "product point",
                format!("latent dimension {p}"),
                format!("W_s has {}, W_t has {} columns", ws.dim(), wt.dim()),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(IlsError::Config("slack parameters must be finite".into()));
        }
        Ok(ProductPoint { ws, wt, m, v })
    }

    pub fn latent_dim(&self) -> usize {
        self.m.dim()
    }

    pub fn pair_count(&self) -> usize {
        self.v.len()
    }

    fn check_bundle(&self, b: &TangentBundle, context: &'static str) -> Result<()> {
        let ok = b.xi_s.shape() == self.ws.matrix().shape()
            && b.xi_t.shape() == self.wt.matrix().shape()
            && b.xi_m.shape() == self.m.matrix().shape()
            && b.xi_v.len() == self.v.len();
        if !ok {
            return Err(IlsError::shape(
                context,
                format!(
                    "({:?}, {:?}, {:?}, {})",
                    self.ws.matrix().shape(),
                    self.wt.matrix().shape(),
                    self.m.matrix().shape(),
                    self.v.len()
                ),
                format!(
                    "({:?}, {:?}, {:?}, {})",
                    b.xi_s.shape(),
                    b.xi_t.shape(),
                    b.xi_m.shape(),
                    b.xi_v.len()
                ),
            ));
        }
        Ok(())
    }

    /// Factor-wise conversion of Euclidean gradients to Riemannian gradients.
    pub fn rgrad(&self, egrad: &TangentBundle) -> Result<TangentBundle> {
        self.check_bundle(egrad, "product gradient")?;
        Ok(TangentBundle {
            xi_s: self.ws.egrad_to_rgrad(&egrad.xi_s)?,
            xi_t: self.wt.egrad_to_rgrad(&egrad.xi_t)?,
            xi_m: self.m.egrad_to_rgrad(&egrad.xi_m)?,
            xi_v: egrad.xi_v.clone(),
        })
    }

    /// Factor-wise retraction; the slack factor moves by plain addition.
    pub fn retract(&self, step: &TangentBundle) -> Result<Self> {
        self.check_bundle(step, "product retraction")?;
        Ok(ProductPoint {
            ws: self.ws.retract(&step.xi_s)?,
            wt: self.wt.retract(&step.xi_t)?,
            m: self.m.retract(&step.xi_m)?,
            v: &self.v + &step.xi_v,
        })
    }

    /// Sum of the factor metrics.
    pub fn inner(&self, a: &TangentBundle, b: &TangentBundle) -> Result<f64> {
        self.check_bundle(a, "product inner product")?;
        self.check_bundle(b, "product inner product")?;
        let inv = self.m.inverse();
        let spd = (&inv * &a.xi_m * &inv).dot(&b.xi_m.transpose());
        Ok(a.xi_s.dot(&b.xi_s) + a.xi_t.dot(&b.xi_t) + spd + a.xi_v.dot(&b.xi_v))
    }

    pub fn norm(&self, a: &TangentBundle) -> Result<f64> {
        Ok(self.inner(a, a)?.max(0.0).sqrt())
    }
}

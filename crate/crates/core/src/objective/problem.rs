use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, soft_hinge};
use super::pairs::{Domain, PairSet};
use super::stats::DomainStats;
use super::stein::stein_divergence;
use crate::error::{IlsError, Result};
use crate::linalg::spd_inverse;
use crate::manifold::{ProductPoint, StiefelPoint, TangentBundle};
use crate::optimizer::Objective;

/// Components of the total cost.
///
/// `total = discriminative + regularizer + slack_penalty + lambda * statistical`,
/// where `discriminative` is the mean soft-margin pair loss only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub discriminative: f64,
    pub statistical: f64,
    pub regularizer: f64,
    pub slack_penalty: f64,
}

impl LossBreakdown {
    pub fn from_parts(discriminative: f64, statistical: f64, regularizer: f64, slack_penalty: f64, lambda: f64) -> Self {
        LossBreakdown {
            total: discriminative + regularizer + slack_penalty + lambda * statistical,
            discriminative,
            statistical,
            regularizer,
            slack_penalty,
        }
    }

    /// Loss with only a total, for objectives that have no decomposition.
    pub fn total_only(total: f64) -> Self {
        LossBreakdown {
            total,
            discriminative: total,
            ..Default::default()
        }
    }
}

/// Metric regularizer `(1/p) stein(M, I)`.
pub fn metric_regularizer(m: &DMatrix<f64>) -> Result<f64> {
    let p = m.nrows();
    Ok(stein_divergence(m, &DMatrix::identity(p, p))? / p as f64)
}

/// Statistical loss `(1/p) stein(W_s^T S_s W_s, W_t^T S_t W_t)`.
pub fn statistical_loss(ws: &StiefelPoint, wt: &StiefelPoint, stats: &DomainStats) -> Result<f64> {
    let (a, b) = projected_covariances(ws.matrix(), wt.matrix(), stats)?;
    Ok(stein_divergence(&a, &b)? / ws.dim() as f64)
}

fn projected_covariances(
    ws: &DMatrix<f64>,
    wt: &DMatrix<f64>,
    stats: &DomainStats,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if ws.nrows() != stats.sigma_s.nrows() || wt.nrows() != stats.sigma_t.nrows() {
        return Err(IlsError::shape(
            "statistical loss",
            format!("{} and {} rows", stats.sigma_s.nrows(), stats.sigma_t.nrows()),
            format!("{} and {} rows", ws.nrows(), wt.nrows()),
        ));
    }
    let a = ws.transpose() * &stats.sigma_s * ws;
    let b = wt.transpose() * &stats.sigma_t * wt;
    Ok(((&a + a.transpose()) * 0.5, (&b + b.transpose()) * 0.5))
}

/// `(1/N) sqrt(sum_k exp(2 v_k))` and its gradient, scaled to avoid overflow.
fn slack_penalty(v: &DVector<f64>, with_grad: bool) -> (f64, Option<DVector<f64>>) {
    let n = v.len();
    if n == 0 {
        return (0.0, with_grad.then(|| DVector::zeros(0)));
    }
    let top = v.max();
    let scaled = v.map(|vk| (vk - top).exp());
    let root = scaled.norm();
    let value = top.exp() * root / n as f64;
    let grad = with_grad.then(|| scaled.map(|w| top.exp() * w * w / (root * n as f64)));
    (value, grad)
}

/// The full cost over a fixed data set and pair set.
///
/// Sample matrices hold one centered sample per row. Pair terms are
/// accumulated sequentially in pair order, so evaluations are reproducible
/// bit for bit.
#[derive(Debug, Clone)]
pub struct IlsProblem {
    // samples stored column-wise: s x n_s and t x n_t
    source_cols: DMatrix<f64>,
    target_cols: DMatrix<f64>,
    pairs: PairSet,
    stats: DomainStats,
    beta: f64,
    lambda: f64,
}

impl IlsProblem {
    /// Builds the problem, estimating domain statistics from the samples.
    pub fn new(source: &DMatrix<f64>, target: &DMatrix<f64>, pairs: PairSet, beta: f64, lambda: f64) -> Result<Self> {
        let stats = DomainStats::from_samples(source, target)?;
        Self::with_stats(source, target, pairs, stats, beta, lambda)
    }

    pub fn with_stats(
        source: &DMatrix<f64>,
        target: &DMatrix<f64>,
        pairs: PairSet,
        stats: DomainStats,
        beta: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(IlsError::Config(format!("beta must be positive and finite, got {beta}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(IlsError::Config(format!("lambda must be non-negative and finite, got {lambda}")));
        }
        if pairs.is_empty() {
            return Err(IlsError::Config("pair set is empty".into()));
        }
        pairs.validate(source.nrows(), target.nrows())?;
        if stats.sigma_s.nrows() != source.ncols() || stats.sigma_t.nrows() != target.ncols() {
            return Err(IlsError::shape(
                "domain statistics",
                format!("{} and {} features", source.ncols(), target.ncols()),
                format!("{} and {}", stats.sigma_s.nrows(), stats.sigma_t.nrows()),
            ));
        }
        Ok(IlsProblem {
            source_cols: source.transpose(),
            target_cols: target.transpose(),
            pairs,
            stats,
            beta,
            lambda,
        })
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn stats(&self) -> &DomainStats {
        &self.stats
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn source_dim(&self) -> usize {
        self.source_cols.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.target_cols.nrows()
    }

    /// Same problem with a different statistical-loss weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(IlsError::Config(format!("lambda must be non-negative and finite, got {lambda}")));
        }
        Ok(IlsProblem { lambda, ..self.clone() })
    }

    fn check_point(&self, point: &ProductPoint) -> Result<()> {
        if point.ws.ambient_dim() != self.source_dim()
            || point.wt.ambient_dim() != self.target_dim()
            || point.pair_count() != self.pairs.len()
        {
            return Err(IlsError::shape(
                "ils objective",
                format!("W_s with {} rows, W_t with {} rows, {} slacks", self.source_dim(), self.target_dim(), self.pairs.len()),
                format!(
                    "{} rows, {} rows, {} slacks",
                    point.ws.ambient_dim(),
                    point.wt.ambient_dim(),
                    point.pair_count()
                ),
            ));
        }
        Ok(())
    }

    /// Mean pair loss, plus optional gradients `(dW_s, dW_t, dM, dv)` of it.
    #[allow(clippy::type_complexity)]
    fn pair_terms(
        &self,
        point: &ProductPoint,
        with_grad: bool,
    ) -> (f64, Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>)>) {
        let p = point.latent_dim();
        let n_pairs = self.pairs.len() as f64;
        let m = point.m.matrix();
        // latent samples, one per column
        let zs = point.ws.matrix().transpose() * &self.source_cols;
        let zt = point.wt.matrix().transpose() * &self.target_cols;

        let mut coef_s = DMatrix::<f64>::zeros(p, zs.ncols());
        let mut coef_t = DMatrix::<f64>::zeros(p, zt.ncols());
        let mut grad_m = DMatrix::<f64>::zeros(p, p);
        let mut grad_v = DVector::<f64>::zeros(self.pairs.len());
        let mut diff = DVector::<f64>::zeros(p);
        let mut m_diff = DVector::<f64>::zeros(p);
        let mut total = 0.0;

        for (k, pair) in self.pairs.iter().enumerate() {
            let z1 = match pair.first.domain {
                Domain::Source => zs.column(pair.first.index),
                Domain::Target => zt.column(pair.first.index),
            };
            let z2 = match pair.second.domain {
                Domain::Source => zs.column(pair.second.index),
                Domain::Target => zt.column(pair.second.index),
            };
            diff.copy_from(&z1);
            diff -= &z2;
            m_diff.gemv(1.0, m, &diff, 0.0);
            let dist = diff.dot(&m_diff);
            let y = pair.label.sign();
            let slack = point.v[k].exp();
            let margin = 1.0 + y * slack;
            let arg = y * (dist - margin);
            total += soft_hinge(arg, self.beta);

            if with_grad {
                let s = sigmoid(self.beta * arg);
                // d loss_k / d dist, with the 1/N factor of the mean
                let c = y * s / n_pairs;
                grad_m.ger(c, &diff, &diff, 1.0);
                grad_v[k] = -slack * s / n_pairs;
                let mut add = |domain: Domain, index: usize, scale: f64| {
                    let col = match domain {
                        Domain::Source => coef_s.column_mut(index),
                        Domain::Target => coef_t.column_mut(index),
                    };
                    let mut col = col;
                    col.axpy(scale, &m_diff, 1.0);
                };
                add(pair.first.domain, pair.first.index, 2.0 * c);
                add(pair.second.domain, pair.second.index, -2.0 * c);
            }
        }

        let mean = total / n_pairs;
        let grads = with_grad.then(|| {
            let grad_s = &self.source_cols * coef_s.transpose();
            let grad_t = &self.target_cols * coef_t.transpose();
            (grad_s, grad_t, grad_m, grad_v)
        });
        (mean, grads)
    }

    /// Soft-margin discriminative loss: mean pair loss + metric regularizer +
    /// slack penalty.
    pub fn discriminative_loss(&self, point: &ProductPoint) -> Result<f64> {
        let b = self.loss(point)?;
        Ok(b.discriminative + b.regularizer + b.slack_penalty)
    }

    pub fn statistical_loss(&self, point: &ProductPoint) -> Result<f64> {
        self.check_point(point)?;
        statistical_loss(&point.ws, &point.wt, &self.stats)
    }

    /// Evaluates every component of the cost.
    pub fn loss(&self, point: &ProductPoint) -> Result<LossBreakdown> {
        self.check_point(point)?;
        let (pairs, _) = self.pair_terms(point, false);
        let regularizer = metric_regularizer(point.m.matrix())?;
        let (slack, _) = slack_penalty(&point.v, false);
        let statistical = statistical_loss(&point.ws, &point.wt, &self.stats)?;
        Ok(LossBreakdown::from_parts(pairs, statistical, regularizer, slack, self.lambda))
    }

    /// Euclidean gradient of the total cost with respect to `(W_s, W_t, M, v)`.
    pub fn euclidean_gradients(&self, point: &ProductPoint) -> Result<TangentBundle> {
        self.check_point(point)?;
        let p = point.latent_dim();
        let (_, grads) = self.pair_terms(point, true);
        let (mut grad_s, mut grad_t, mut grad_m, mut grad_v) = grads.expect("gradients requested");

        // metric regularizer: (1/p) [(M + I)^-1 - M^-1 / 2]
        let m = point.m.matrix();
        let plus_identity = m + DMatrix::<f64>::identity(p, p);
        grad_m += (spd_inverse(&plus_identity, "metric regularizer")? - point.m.inverse() * 0.5) / p as f64;
        grad_m = (&grad_m + grad_m.transpose()) * 0.5;

        let (_, slack_grad) = slack_penalty(&point.v, true);
        grad_v += slack_grad.expect("gradient requested");

        if self.lambda != 0.0 {
            let ws = point.ws.matrix();
            let wt = point.wt.matrix();
            let (a, b) = projected_covariances(ws, wt, &self.stats)?;
            let sum_inv = spd_inverse(&(&a + &b), "statistical loss")?;
            let a_inv = spd_inverse(&a, "statistical loss")?;
            let b_inv = spd_inverse(&b, "statistical loss")?;
            let scale = self.lambda / p as f64;
            grad_s += &self.stats.sigma_s * ws * (&sum_inv * 2.0 - a_inv) * scale;
            grad_t += &self.stats.sigma_t * wt * (&sum_inv * 2.0 - b_inv) * scale;
        }

        Ok(TangentBundle {
            xi_s: grad_s,
            xi_t: grad_t,
            xi_m: grad_m,
            xi_v: grad_v,
        })
    }
}

impl Objective for IlsProblem {
    fn evaluate(&self, point: &ProductPoint) -> Result<LossBreakdown> {
        self.loss(point)
    }

    fn euclidean_gradient(&self, point: &ProductPoint) -> Result<TangentBundle> {
        self.euclidean_gradients(point)
    }
}

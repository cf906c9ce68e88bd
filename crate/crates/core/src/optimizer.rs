//! Riemannian gradient descent on the product manifold.
//!
//! Three drivers share one backtracking Armijo line search:
//!
//! * [`optimize_product`] moves all four factors jointly along the full
//!   Riemannian gradient.
//! * [`optimize_alternating`] cycles `W_s -> W_t -> M -> v`, taking one
//!   backtracking step on a single factor at a time with the others frozen.
//! * [`optimize_pgd`] is the projected-gradient baseline: a Euclidean step on
//!   every block followed by projection back onto the constraint sets.
//!
//! Gradient norms are always measured with the product metric.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result};
use crate::linalg::{sym, SymEigen};
use crate::manifold::{Block, ProductPoint, SpdPoint, StiefelPoint, TangentBundle};
use crate::objective::LossBreakdown;

/// A differentiable cost on the product manifold.
pub trait Objective {
    fn evaluate(&self, point: &ProductPoint) -> Result<LossBreakdown>;

    /// Euclidean gradient, shaped like the point.
    fn euclidean_gradient(&self, point: &ProductPoint) -> Result<TangentBundle>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMode {
    Alternating,
    Product,
    Pgd,
}

impl std::str::FromStr for OptimizerMode {
    type Err = IlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternating" => Ok(OptimizerMode::Alternating),
            "product" => Ok(OptimizerMode::Product),
            "pgd" => Ok(OptimizerMode::Pgd),
            other => Err(IlsError::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backtracking {
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_trials: usize,
}

impl Default for Backtracking {
    fn default() -> Self {
        Backtracking {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_trials: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub mode: OptimizerMode,
    pub max_iters: usize,
    /// First trial step; later searches start from twice the last accepted step.
    pub initial_step: f64,
    pub backtracking: Backtracking,
    pub grad_norm_tol: f64,
    /// Stop when the relative decrease over [`LOSS_WINDOW`] iterations falls below this.
    pub loss_rel_tol: f64,
}

/// Iteration window for the relative loss-change stopping rule.
pub const LOSS_WINDOW: usize = 10;

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            mode: OptimizerMode::Alternating,
            max_iters: 500,
            initial_step: 1.0,
            backtracking: Backtracking::default(),
            grad_norm_tol: 1e-6,
            loss_rel_tol: 1e-9,
        }
    }
}

impl OptimizerConfig {
    pub fn with_mode(mode: OptimizerMode) -> Self {
        OptimizerConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.backtracking;
        if !(b.shrink > 0.0 && b.shrink < 1.0) {
            return Err(IlsError::Config(format!("shrink factor must lie in (0, 1), got {}", b.shrink)));
        }
        if !(b.sufficient_decrease > 0.0 && b.sufficient_decrease < 1.0) {
            return Err(IlsError::Config(format!(
                "sufficient-decrease constant must lie in (0, 1), got {}",
                b.sufficient_decrease
            )));
        }
        if b.max_trials == 0 || self.max_iters == 0 {
            return Err(IlsError::Config("max_trials and max_iters must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(IlsError::Config(format!("initial step must be positive, got {}", self.initial_step)));
        }
        if !(self.grad_norm_tol > 0.0 && self.loss_rel_tol > 0.0) {
            return Err(IlsError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted iteration (iteration 0 is the starting point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: LossBreakdown,
    /// Riemannian gradient norm at the recorded iterate.
    pub grad_norm: f64,
    /// Accepted step size; for alternating mode the largest block step of the cycle.
    pub step: f64,
    pub elapsed_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    LossStalled,
    LineSearchFailed,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "max-iterations",
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::LossStalled => "loss-stalled",
            StopReason::LineSearchFailed => "line-search-failed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub point: ProductPoint,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: StopReason,
}

impl OptimizationResult {
    pub fn initial_loss(&self) -> LossBreakdown {
        self.trace[0].loss
    }

    pub fn final_loss(&self) -> LossBreakdown {
        self.trace.last().expect("trace is never empty").loss
    }

    /// Number of iterations after the starting point.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// One Riemannian gradient step `R_x(-alpha * grad)`.
pub fn rgd_step(point: &ProductPoint, rgrad: &TangentBundle, alpha: f64) -> Result<ProductPoint> {
    if !(alpha > 0.0) {
        return Err(IlsError::Config(format!("step size must be positive, got {alpha}")));
    }
    point.retract(&(rgrad * -alpha))
}

/// Runs the optimizer selected by `config.mode`.
pub fn optimize<O: Objective + ?Sized>(
    initial: &ProductPoint,
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    match config.mode {
        OptimizerMode::Product => optimize_product(initial, objective, config),
        OptimizerMode::Alternating => optimize_alternating(initial, objective, config),
        OptimizerMode::Pgd => optimize_pgd(initial, objective, config),
    }
}

struct Accepted {
    point: ProductPoint,
    loss: LossBreakdown,
    step: f64,
}

/// Backtracking Armijo search along `-direction`, where `slope` is the
/// squared Riemannian norm of `direction`. Failed retractions and non-finite
/// losses count as rejected trials.
///
/// Once a step passes the sufficient-decrease test, shrinking continues for
/// as long as it strictly lowers the loss. This keeps an over-long step that
/// barely passes the test (e.g. one that jumps across a valley) from being
/// re-accepted every iteration.
fn backtrack<O: Objective + ?Sized>(
    objective: &O,
    point: &ProductPoint,
    loss: f64,
    direction: &TangentBundle,
    slope: f64,
    first_step: f64,
    config: &Backtracking,
) -> Option<Accepted> {
    let trial = |alpha: f64| -> Option<(ProductPoint, LossBreakdown)> {
        let candidate = rgd_step(point, direction, alpha).ok()?;
        let candidate_loss = objective.evaluate(&candidate).ok()?;
        candidate_loss.total.is_finite().then_some((candidate, candidate_loss))
    };
    let mut alpha = first_step;
    let mut best: Option<Accepted> = None;
    for _ in 0..config.max_trials {
        match (trial(alpha), &best) {
            (Some((candidate, candidate_loss)), None) => {
                if candidate_loss.total <= loss - config.sufficient_decrease * alpha * slope {
                    best = Some(Accepted {
                        point: candidate,
                        loss: candidate_loss,
                        step: alpha,
                    });
                }
            }
            (Some((candidate, candidate_loss)), Some(current)) => {
                if candidate_loss.total < current.loss.total {
                    best = Some(Accepted {
                        point: candidate,
                        loss: candidate_loss,
                        step: alpha,
                    });
                } else {
                    break;
                }
            }
            (None, Some(_)) => break,
            (None, None) => {}
        }
        alpha *= config.shrink;
    }
    best
}

fn stalled(history: &[f64], tol: f64) -> bool {
    if history.len() <= LOSS_WINDOW {
        return false;
    }
    let current = history[history.len() - 1];
    let earlier = history[history.len() - 1 - LOSS_WINDOW];
    (earlier - current).abs() <= tol * earlier.abs().max(f64::MIN_POSITIVE)
}

/// Riemannian gradient and its squared norm.
fn riemannian_gradient<O: Objective + ?Sized>(objective: &O, point: &ProductPoint) -> Result<(TangentBundle, f64)> {
    let egrad = objective.euclidean_gradient(point)?;
    let rgrad = point.rgrad(&egrad)?;
    let norm_sq = point.inner(&rgrad, &rgrad)?.max(0.0);
    Ok((rgrad, norm_sq))
}

/// Joint Riemannian gradient descent over the full product manifold.
pub fn optimize_product<O: Objective + ?Sized>(
    initial: &ProductPoint,
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let clock = Instant::now();
    let mut point = initial.clone();
    let mut loss = objective.evaluate(&point)?;
    let (mut rgrad, mut norm_sq) = riemannian_gradient(objective, &point)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        loss,
        grad_norm: norm_sq.sqrt(),
        step: 0.0,
        elapsed_secs: clock.elapsed().as_secs_f64(),
        note: None,
    }];
    let mut history = vec![loss.total];
    let mut next_step = config.initial_step;

    let stop_reason = loop {
        if norm_sq.sqrt() < config.grad_norm_tol {
            break StopReason::GradientTolerance;
        }
        if trace.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let Some(accepted) = backtrack(
            objective,
            &point,
            loss.total,
            &rgrad,
            norm_sq,
            next_step,
            &config.backtracking,
        ) else {
            break StopReason::LineSearchFailed;
        };
        point = accepted.point;
        loss = accepted.loss;
        next_step = 2.0 * accepted.step;
        (rgrad, norm_sq) = riemannian_gradient(objective, &point)?;
        history.push(loss.total);
        trace.push(TraceRecord {
            iteration: trace.len(),
            loss,
            grad_norm: norm_sq.sqrt(),
            step: accepted.step,
            elapsed_secs: clock.elapsed().as_secs_f64(),
            note: None,
        });
        if stalled(&history, config.loss_rel_tol) {
            break StopReason::LossStalled;
        }
    };

    Ok(OptimizationResult {
        point,
        trace,
        stop_reason,
    })
}

/// Block-coordinate Riemannian gradient descent in the fixed order
/// `W_s, W_t, M, v`. Each block keeps its own step-size memory.
pub fn optimize_alternating<O: Objective + ?Sized>(
    initial: &ProductPoint,
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let clock = Instant::now();
    let mut point = initial.clone();
    let mut loss = objective.evaluate(&point)?;
    let (mut rgrad, mut norm_sq) = riemannian_gradient(objective, &point)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        loss,
        grad_norm: norm_sq.sqrt(),
        step: 0.0,
        elapsed_secs: clock.elapsed().as_secs_f64(),
        note: None,
    }];
    let mut history = vec![loss.total];
    let mut next_step = [config.initial_step; 4];

    let stop_reason = loop {
        if norm_sq.sqrt() < config.grad_norm_tol {
            break StopReason::GradientTolerance;
        }
        if trace.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let mut moved = false;
        let mut largest_step = 0.0f64;
        for (slot, block) in Block::ALL.into_iter().enumerate() {
            // the gradient at the current point is fresh for the first block
            if moved {
                rgrad = riemannian_gradient(objective, &point)?.0;
            }
            let direction = rgrad.restricted_to(block);
            let slope = point.inner(&direction, &direction)?;
            if !(slope > 0.0) {
                continue;
            }
            if let Some(accepted) = backtrack(
                objective,
                &point,
                loss.total,
                &direction,
                slope,
                next_step[slot],
                &config.backtracking,
            ) {
                point = accepted.point;
                loss = accepted.loss;
                next_step[slot] = 2.0 * accepted.step;
                largest_step = largest_step.max(accepted.step);
                moved = true;
            }
        }
        if !moved {
            break StopReason::LineSearchFailed;
        }
        (rgrad, norm_sq) = riemannian_gradient(objective, &point)?;
        history.push(loss.total);
        trace.push(TraceRecord {
            iteration: trace.len(),
            loss,
            grad_norm: norm_sq.sqrt(),
            step: largest_step,
            elapsed_secs: clock.elapsed().as_secs_f64(),
            note: None,
        });
        if stalled(&history, config.loss_rel_tol) {
            break StopReason::LossStalled;
        }
    };

    Ok(OptimizationResult {
        point,
        trace,
        stop_reason,
    })
}

/// Relative eigenvalue floor used when projecting onto the SPD cone. Twice
/// the acceptance floor so the projected matrix survives validation after
/// round-off.
const PGD_EIGEN_FLOOR: f64 = 2e-12;

/// Nearest point of the constraint set to an unconstrained iterate.
fn project(ws: &DMatrix<f64>, wt: &DMatrix<f64>, m: &DMatrix<f64>, v: nalgebra::DVector<f64>) -> Result<ProductPoint> {
    let ws = StiefelPoint::from_unitary_factor(ws)?;
    let wt = StiefelPoint::from_unitary_factor(wt)?;
    let eig = SymEigen::new(&sym(m));
    let top = eig.max();
    if !(top > 0.0 && top.is_finite()) {
        return Err(IlsError::Conditioning {
            context: "spd projection",
            min_eig: eig.min(),
            max_eig: top,
        });
    }
    let floor = PGD_EIGEN_FLOOR * top;
    let m = SpdPoint::new(eig.map(|l| l.max(floor)))?;
    ProductPoint::new(ws, wt, m, v)
}

fn pgd_step(point: &ProductPoint, egrad: &TangentBundle, alpha: f64) -> Result<ProductPoint> {
    project(
        &(point.ws.matrix() - &egrad.xi_s * alpha),
        &(point.wt.matrix() - &egrad.xi_t * alpha),
        &(point.m.matrix() - &egrad.xi_m * alpha),
        &point.v - &egrad.xi_v * alpha,
    )
}

/// Projected gradient descent baseline.
///
/// Step sizes come from the same backtracking schedule, but when no trial
/// satisfies the sufficient-decrease test the smallest trial is taken anyway,
/// so the loss sequence is not guaranteed to be monotone. A failed
/// projection is recorded in the trace and the previous iterate is kept.
pub fn optimize_pgd<O: Objective + ?Sized>(
    initial: &ProductPoint,
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let clock = Instant::now();
    let bt = &config.backtracking;
    let mut point = initial.clone();
    let mut loss = objective.evaluate(&point)?;
    let mut egrad = objective.euclidean_gradient(&point)?;
    let mut grad_norm = point.norm(&point.rgrad(&egrad)?)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        loss,
        grad_norm,
        step: 0.0,
        elapsed_secs: clock.elapsed().as_secs_f64(),
        note: None,
    }];
    let mut history = vec![loss.total];
    let mut next_step = config.initial_step;

    let stop_reason = loop {
        if grad_norm < config.grad_norm_tol {
            break StopReason::GradientTolerance;
        }
        if trace.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let slope = egrad.euclidean_dot(&egrad);
        let mut alpha = next_step;
        let mut last_trial: Option<(ProductPoint, LossBreakdown, f64)> = None;
        let mut note = None;
        let mut accepted = false;
        for _ in 0..bt.max_trials {
            match pgd_step(&point, &egrad, alpha).and_then(|c| objective.evaluate(&c).map(|l| (c, l))) {
                Ok((candidate, candidate_loss)) if candidate_loss.total.is_finite() => {
                    let good = candidate_loss.total <= loss.total - bt.sufficient_decrease * alpha * slope;
                    last_trial = Some((candidate, candidate_loss, alpha));
                    if good {
                        accepted = true;
                        break;
                    }
                }
                Ok(_) => note = Some("non-finite loss after projection".to_string()),
                Err(e) => note = Some(format!("projection failed: {e}")),
            }
            alpha *= bt.shrink;
        }
        let step = match last_trial {
            Some((candidate, candidate_loss, step)) => {
                if !accepted {
                    note = Some("no sufficient decrease; smallest trial taken".to_string());
                }
                point = candidate;
                loss = candidate_loss;
                next_step = 2.0 * step;
                step
            }
            None => {
                next_step = config.initial_step;
                0.0
            }
        };
        egrad = objective.euclidean_gradient(&point)?;
        grad_norm = point.norm(&point.rgrad(&egrad)?)?;
        history.push(loss.total);
        trace.push(TraceRecord {
            iteration: trace.len(),
            loss,
            grad_norm,
            step,
            elapsed_secs: clock.elapsed().as_secs_f64(),
            note,
        });
        if stalled(&history, config.loss_rel_tol) {
            break StopReason::LossStalled;
        }
    };

    Ok(OptimizationResult {
        point,
        trace,
        stop_reason,
    })
}

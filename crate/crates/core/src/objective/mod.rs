//! The invariant-latent-space cost: a soft-margin pairwise loss on a learned
//! Mahalanobis metric plus a Stein-divergence match of the projected domain
//! covariances, with closed-form Euclidean gradients.

mod logistic;
mod pairs;
mod problem;
mod stats;
mod stein;

pub use logistic::{generalized_logistic, sigmoid, soft_hinge};
pub use pairs::{Domain, Pair, PairLabel, PairSet, SampleRef};
pub use problem::{metric_regularizer, statistical_loss, IlsProblem, LossBreakdown};
pub use stats::{mean_and_covariance, DomainStats, COVARIANCE_RIDGE};
pub use stein::stein_divergence;

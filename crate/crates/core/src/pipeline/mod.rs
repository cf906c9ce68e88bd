//! End-to-end fit and predict: centering, PCA initialization, pair sampling,
//! metric and `beta` initialization, training, latent embedding and 1-NN
//! classification.

mod features;
mod init;
mod model;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{IlsError, Result};
use crate::optimizer::OptimizerConfig;

pub use features::{ClassId, FeatureSet};
pub use init::{beta_from_distances, beta_heuristic, metric_init, pca_init, LatentPairs, METRIC_CLAMP};
pub use model::{embed, fit, knn_classify, nearest_neighbor, FittedModel};
pub use sampling::make_pairs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptationMode {
    /// Pairs from labeled source rows only.
    Unsupervised,
    /// Pairs over labeled source rows and labeled target rows.
    SemiSupervised,
}

impl std::str::FromStr for AdaptationMode {
    type Err = IlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised" => Ok(AdaptationMode::Unsupervised),
            "semi" | "semi-supervised" => Ok(AdaptationMode::SemiSupervised),
            other => Err(IlsError::Config(format!("unknown adaptation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaSetting {
    /// Reciprocal spread of the initial similar-pair distances.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for BetaSetting {
    type Err = IlsError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(BetaSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(b) if b > 0.0 && b.is_finite() => Ok(BetaSetting::Fixed(b)),
            _ => Err(IlsError::Config(format!("beta must be \"auto\" or a positive number, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub lambda: f64,
    pub beta: BetaSetting,
    pub mode: AdaptationMode,
    pub optimizer: OptimizerConfig,
    pub max_similar_pairs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent_dim: 20,
            lambda: 1.0,
            beta: BetaSetting::Auto,
            mode: AdaptationMode::Unsupervised,
            optimizer: OptimizerConfig::default(),
            max_similar_pairs: 10_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(IlsError::Config("latent dimension must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(IlsError::Config(format!("lambda must be non-negative and finite, got {}", self.lambda)));
        }
        if let BetaSetting::Fixed(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(IlsError::Config(format!("beta must be positive and finite, got {b}")));
            }
        }
        if self.max_similar_pairs == 0 {
            return Err(IlsError::Config("max_similar_pairs must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

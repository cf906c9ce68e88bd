//! Invariant latent space domain adaptation.
//!
//! Learns orthonormal projections for a source and a target domain together
//! with a Mahalanobis metric on the shared latent space, by Riemannian
//! gradient descent on a discriminative pairwise loss plus a covariance
//! matching term. Classification in the learned space is 1-nearest-neighbor.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod manifold;
pub mod objective;
pub mod optimizer;
pub mod pipeline;

pub use error::{IlsError, Result, Stage};

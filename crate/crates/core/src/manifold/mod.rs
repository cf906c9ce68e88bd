//! Riemannian geometry of the parameter space: two Stiefel factors for the
//! domain projections, an SPD factor for the latent metric and a Euclidean
//! factor for the slack log-parameters.
//!
//! Stiefel factors use the embedded (Frobenius) metric, the SPD factor uses
//! the affine-invariant metric `tr(M^-1 A M^-1 B)`.

mod product;
mod spd;
mod stiefel;

pub use product::{Block, ProductPoint, TangentBundle};
pub use spd::SpdPoint;
pub use stiefel::StiefelPoint;

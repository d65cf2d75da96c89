//! Estimation of high-rank signal tensors from latent-variable models.

pub mod clustering;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod rank_analysis;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{mse, DenseTensor, Matrix};

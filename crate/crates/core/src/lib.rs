//! Performance modeling and prediction for dense linear algebra.

pub mod error;
pub mod kernels;

pub use error::{Error, Result};
pub mod cachemodel;
pub mod modelgen;
pub mod predictor;
pub mod sampler;
pub mod table;
pub mod tensor;

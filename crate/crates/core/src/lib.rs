//! Sensitivity of GMM and minimum-distance estimates to the moments that
//! identify them, with three worked models: a probit, a Weibull duration
//! model with a time-varying regressor, and a joint-retirement model.

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod gmm;
pub mod linalg;
pub mod normal;
pub mod probit;
pub mod report;
pub mod retirement;
pub mod rng;
pub mod sensitivity;
pub mod weibull;

pub use error::{Error, Result};

//! Conclusive single-rule explanations for random forest predictions.

pub mod audit;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model;
pub mod quorum;
pub mod reduce;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

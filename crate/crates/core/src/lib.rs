//! Robust and classical regression under errors in variables, with the
//! Monte-Carlo engine and real-data pipeline built on them.

pub mod analyze;
pub mod biweight;
pub mod classical;
pub mod error;
pub mod estimator;
pub mod numerics;
pub mod randgen;
pub mod robust_regression;
pub mod robust_scatter;
pub mod simlab;

pub use error::{Error, ErrorKind, Result};
pub use estimator::Estimator;

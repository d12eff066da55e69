//! Randomized quantum feature maps from simulated annealing schedules, with
//! the linear classifier, kernel diagnostics and datasets used to evaluate them.

pub mod classifier;
pub mod data;
pub mod encoding;
pub mod error;
pub mod features;
pub mod kernel;
pub mod matrix;
pub mod rng;
pub mod sim;

pub use error::{AqksError, Result};

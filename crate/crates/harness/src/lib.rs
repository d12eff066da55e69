//! End-to-end experiments with quantum annealing features: configuration,
//! trial runs and sweeps, CSV results and SVG plots.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod results;

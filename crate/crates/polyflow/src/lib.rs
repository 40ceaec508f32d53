//! File formats, experiment pipeline and command-line front end for
//! distributions on convex polytopes.

pub mod config;
pub mod error;
pub mod formats;
pub mod kde;
pub mod pipeline;

pub use config::{ExperimentConfig, Manifold, Overrides};
pub use error::{AppError, Result};

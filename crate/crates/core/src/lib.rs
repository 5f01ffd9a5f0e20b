//! Inverse optimal control for linear-quadratic-Gaussian agents whose
//! motor commands and sensory signals are corrupted by signal-dependent noise.
//!
//! The crate covers the forward problem (optimal controller and filter
//! gains), simulation, an approximate trajectory likelihood that tracks the
//! experimenter's belief about the agent's internal estimate, maximum
//! likelihood fitting, benchmark problems and evaluation metrics.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod linalg;
pub mod model;
pub mod simulate;
pub mod solver;
pub mod zoo;

pub use error::{Error, Result};

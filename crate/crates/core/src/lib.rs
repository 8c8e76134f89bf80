//! Augmented-state Kalman smoothing for estimating a time-dependent
//! diffusivity in one-dimensional periodic heat flow.
//!
//! The state carries Fourier modes of the temperature and of the log
//! diffusivity perturbation. Linear stages are built about mean fields
//! and refined by an outer mean iteration.

pub mod calibration;
pub mod error;
pub mod kalman;
pub mod linalg;
pub mod mean_iteration;
pub mod model;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use model::ModelConfig;
pub use spectral::SpectralField;

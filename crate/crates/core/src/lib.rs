//! Perturbed Arnold cat map toolkit.

pub mod correlation;
pub mod error;
pub mod fluctuation;
pub mod fourier;
pub mod monte_carlo;
pub mod orbit;
pub mod parallel;
pub mod perturbation;
pub mod symbolic;
pub mod torus;

pub use error::{CatError, Result};

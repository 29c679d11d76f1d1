//! Numerical laboratory for radial focusing NLS with nonlinear damping.

pub mod banded;
pub mod cutoff;
pub mod error;
pub mod evolve;
pub mod field;
pub mod functionals;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod io;
pub mod modulation;
pub mod params;
pub mod profiles;
pub mod radiation;
pub mod scalar;

pub use error::{Error, Result};
pub use field::{apply_d, apply_lambda, laplacian, real_pair, ComplexField, C64};
pub use grid::{RadialGrid, Spacing};
pub use params::{derive_params, ModelParams};

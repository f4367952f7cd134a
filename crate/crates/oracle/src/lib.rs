//! Verification oracles for kernels, transforms and closed-loop traces.
//!
//! Nothing here reuses the solver's quadrature, interpolation or finite
//! difference code; residuals are formed in complex arithmetic straight from
//! the coefficient expressions.

mod bessel;
mod composition;
mod residual;

pub use bessel::{bessel_kernel, bessel_kernel_neumann, BESSEL_PIN_LAMBDA10_X1_Y05};
pub use composition::{composition_identity, random_probes};
pub use residual::{kernel_pde_residual, target_residual, target_residual_from, KernelEquation, ResidualReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid too coarse: {0}")]
    TooCoarse(String),
    #[error("need at least 3 equally spaced snapshots: {0}")]
    InsufficientSnapshots(String),
    #[error("point ({x}, {y}) lies outside the triangle 0 <= y <= x <= 1")]
    OutsideTriangle { x: f64, y: f64 },
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Core(#[from] cgle_core::Error),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

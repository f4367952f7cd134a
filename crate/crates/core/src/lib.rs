//! Backstepping boundary control of the linearized complex Ginzburg-Landau
//! equation with spatially and temporally varying coefficients.
//!
//! The pipeline is: describe a plant ([`problem`]), solve the gain kernels
//! ([`kernels`]), map states through the transform ([`transform`]) and run
//! the closed loop ([`sim`]).

pub mod error;
pub mod expr;
pub mod grid;
pub mod kernels;
pub mod problem;
pub mod sim;
pub mod transform;

pub use error::{Error, Result};
pub use grid::TriangleTimeGrid;
pub use kernels::{KernelField, KernelKind, KernelSlice};
pub use problem::{BoundaryKind, CoefficientFn, NormalizedPlant, PlantSpec, TargetSpec};
pub use sim::{Scenario, Scheme, SimulationTrace};
pub use transform::{ControlInput, StateField};

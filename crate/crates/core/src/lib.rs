//! Finite-difference laboratory for two-dimensional Landau-de Gennes
//! Q-tensor minimizers with a biaxial defect core.

pub mod analysis;
pub mod cli;
pub mod construct;
pub mod dump;
pub mod error;
pub mod grid;
pub mod manifold;
pub mod potential;
pub mod qtensor;
pub mod sampling;
pub mod solver;
pub mod vtk;

pub use error::{Error, Result};
pub use potential::{derive_params, MaterialParams};
pub use qtensor::QTensor;

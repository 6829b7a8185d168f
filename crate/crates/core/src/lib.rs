//! Spherically reduced Maxwell–Klein–Gordon evolution in Lorenz gauge, with
//! extraction of radiation fields at null infinity, the interior limit of the
//! potential, the asymptotic system and reference wave solvers.

pub mod asymptotic;
pub mod config;
pub mod data;
pub mod error;
pub mod evolution;
pub mod extraction;
pub mod field;
pub mod interior;
pub mod oracle;
pub mod pipeline;
pub mod quad;
pub mod report;

pub use error::{MkgError, Result};
pub use field::{FieldState, NullFrameSample, RadialGrid, Weights};

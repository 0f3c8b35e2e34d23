//! Numerical laboratory for a spatially structured individual-based model of
//! evolution: the microscopic simulator, its reaction-diffusion limit, the
//! principal-eigenvalue and survival-probability solvers, and the limiting
//! trait substitution sequence.

#[cfg(feature = "cli")]
pub mod cli;
pub mod domain;
pub mod error;
pub mod flat;
pub mod grid;
pub mod ibm;
pub mod model;
pub mod pde;
pub mod presets;
pub mod spectral;
pub mod stats;
pub mod survival;
pub mod tss;
pub mod verify;

pub use error::{Error, Result};
pub use model::{parse_config, render, ModelSpec};

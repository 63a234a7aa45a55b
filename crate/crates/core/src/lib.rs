//! Desk-scale spherical Fourier neural operator climate emulator.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod forcing;
pub mod grid;
pub mod layout;
pub mod losses;
pub mod model;
pub mod optim;
pub mod rollout;
pub mod sht;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use grid::{build_grid, GridSpec};

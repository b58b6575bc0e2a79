//! Spectral simulation of the stochastic fractional porous medium equation
//! on a periodic lattice, with the statistical checks used to verify it.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod noise;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

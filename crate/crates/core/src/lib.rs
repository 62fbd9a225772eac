//! Stochastic energy-balance climate model with a slowly moving ice line:
//! coefficient functions, the frozen fast subsystem, the averaged ice-line
//! diffusion, and Monte Carlo experiments on the full slow-fast system.

pub mod averaging;
pub mod coefficients;
pub mod error;
pub mod field;
pub mod frozen;
pub mod grid;
pub mod io;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod strategy;
pub mod validation;

pub use error::{EbmError, Result};
pub use params::ModelParams;
pub use strategy::{Model, NoiseSpec, StrategyRegistry};

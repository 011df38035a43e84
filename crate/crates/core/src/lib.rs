//! Stochastic calculus via regularization on simulated càdlàg paths.

pub mod catalog;
pub mod dirichlet;
pub mod error;
pub mod functions;
pub mod ito;
pub mod jumps;
pub mod paths;
pub mod quadrature;
pub mod regularize;
pub mod report;
pub mod rng;
pub mod simulate;

pub use error::*;
pub use paths::{make_path, uniform_grid, CadlagPath, Interpolation};
pub use regularize::{EpsilonSchedule, Estimator, LimitReport};

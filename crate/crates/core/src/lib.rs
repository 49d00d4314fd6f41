pub mod conjugate;
pub mod discrete;
pub mod error;
pub mod experiments;
pub mod fda;
pub mod fourier;
pub mod gamma;
pub mod model;
pub mod potential;
pub mod neural;
pub mod rng;
pub mod semidual;

pub use error::{Error, Result};

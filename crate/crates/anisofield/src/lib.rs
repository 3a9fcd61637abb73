//! Anisotropic linear random fields on Z^3 with long-range coefficients:
//! classification of scaling regimes, exact covariances, simulation, and the
//! limiting operator-scaling fields.

pub mod covariance;
pub mod error;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod laplace;
pub mod limit;
pub mod model;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};

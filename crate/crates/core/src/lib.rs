//! Moment machinery for fractional stochastic PDEs driven by Gaussian noise
//! that is white in time and Riesz (or white) in space.

pub mod asymptotics;
pub mod bounds;
pub mod chaos;
pub mod classify;
pub mod error;
pub mod kernel;
pub mod mc;
pub mod model;
pub mod optimize;
pub mod quad;
pub mod special;
pub mod variational;
pub mod verify;

//! Calibration toolkit for a 3-input/3-output plant: least-squares
//! identification of a 12-parameter linear map, D-optimal selection of the
//! measurement postures that feed it, and a PPO policy trained in simulation
//! to make that selection under a fixed budget.

pub mod calib;
pub mod doe;
pub mod error;
pub mod eval;
pub mod rl;
pub mod sim;

pub use error::{Error, ErrorCategory, Result};

//! Stationary, time-reversible, infinitely divisible integer-valued processes:
//! construction, simulation and exact verification.

pub mod cli;
pub mod ctmc;
pub mod discrete;
pub mod error;
pub mod idlaw;
pub mod joint;
pub mod series;
pub mod verify;

pub use error::{Error, Result};

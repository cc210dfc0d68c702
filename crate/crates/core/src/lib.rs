//! Online selection of a monotone increasing subsequence from a uniform
//! random sample.
//!
//! The crate implements the adaptive threshold policy, grid dynamic programs
//! for its value functions and for the optimal policy, numerical checks of
//! the bounds that govern them, and a seeded Monte Carlo simulator.

pub mod analysis;
pub mod error;
pub mod export;
pub mod family;
pub mod format;
pub mod policy;
pub mod report;
pub mod simulate;
pub mod value;
pub mod verify;

pub use error::{Error, Result};

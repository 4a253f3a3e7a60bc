//! Magnetostatic simulator for wire-grid atom trap lattices.

pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod formulas;
pub mod geometry;
pub mod perturbation;
pub mod scenarios;
pub mod traps;
pub mod units;
pub mod verify;

pub use error::{Error, Result};

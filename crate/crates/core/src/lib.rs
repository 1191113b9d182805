//! Kinetic beam schemes and reference solvers for the perfectly hyperbolic
//! Maxwell system.

pub mod cases;
pub mod error;
pub mod io;
pub mod kinetic;
pub mod phm;
pub mod problem;
pub mod runner;
pub mod structured;
pub mod unstructured;

pub use error::{Error, Result};

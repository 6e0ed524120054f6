//! Homology of semialgebraic sets from grid samples and Čech nerves.
//!
//! The pipeline homogenizes an affine system, samples the sphere on a cube
//! grid refined until a condition-based stopping rule holds, keeps the
//! points passing a relaxed membership test and computes the integral
//! homology of the Čech nerve of balls around them.

pub mod condition;
pub mod covering;
pub mod error;
pub mod grid;
pub mod homology;
pub mod linalg;
pub mod nerve;
pub mod pipeline;
pub mod polysys;
pub mod serde_ext;
pub mod shubsmale;

pub use error::{Error, Result};

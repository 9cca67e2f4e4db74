//! Invariant cones in exterior powers and controllability of bilinear
//! control systems `ẋ = Ax + uBx` on `Sl(d, ℝ)`.
//!
//! A system fails to be controllable exactly when its semigroup leaves a
//! cone invariant in some exterior power `∧^k ℝ^d`. The crate certifies
//! invariant orthants exactly and looks for orbit cones that contain a line,
//! which rule invariant cones out.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod exterior;
pub mod larc;
pub mod linalg;
pub mod orthant;
pub mod verdict;

pub use error::{Error, Result};

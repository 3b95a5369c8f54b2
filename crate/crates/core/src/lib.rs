//! Boundary-layer expansion of steady Navier-Stokes flow in a channel with a moving wall.
//!
//! The pipeline builds the zeroth-order boundary layer (von Mises / porous-medium march),
//! the first-order outer corrector (elliptic solve), the first-order boundary-layer corrector
//! (linear parabolic march), assembles the expansion, and compares it against a Newton solve
//! of the full steady equations over a sweep of viscosities.

pub mod assembly;
pub mod error;
pub mod euler1;
pub mod harness;
pub mod numerics;
pub mod prandtl0;
pub mod prandtl1;
pub mod reference_ns;
pub mod spec;

pub use error::{Error, Result};

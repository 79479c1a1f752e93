//! Numerical laboratory for planar Allen–Cahn solutions Δu = W'(u) with
//! several interface layers.
//!
//! The crate builds the one-dimensional heteroclinic profile, solves the PDE
//! on truncated domains, and measures the structures that describe such
//! solutions at large scale: energy concentration on rays and its integer
//! densities, the convex stress potential, the translation fit of layered
//! cross-sections, and Morse-index / spectral-gap estimates.

pub mod blowdown;
pub mod error;
pub mod field;
pub mod fitspec;
pub mod io;
pub mod pipeline;
pub mod potentials;
pub mod profile;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod spline;
pub mod stress;

pub use error::{Error, Result, Stage};
pub use field::{Curve, Field2D, Grid2D};
pub use potentials::{Order, Potential};
pub use profile::Profile1D;

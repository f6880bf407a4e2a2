//! Numerical laboratory for the regularized one-phase free-boundary
//! problem `Delta u = Phi_eps'(u) / 2`.
//!
//! The crate builds the one-dimensional solutions and their truncated
//! barriers to quadrature accuracy, solves the semilinear equation on
//! uniform grids, and measures flatness, Weiss energy, decay and
//! non-degeneracy on the resulting fields.

pub mod analysis;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod numerics;
pub mod potential;
pub mod profiles1d;
pub mod supersolutions;

pub use error::{Error, Result};
pub use grid::{GridField, Point};
pub use potential::PotentialSpec;

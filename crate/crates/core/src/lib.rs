//! Discretized fractional Sobolev energies on truncated grids.
//!
//! The crate works with piecewise-constant fields on a uniform grid over
//! `[-L, L]^d` (`d = 1, 2`), extended by zero outside the box. On top of the
//! discrete `(s, p)` Gagliardo energy it provides capacities, Maz'ya-type
//! weight norms and concentration profiles, rearrangements and Lorentz norms,
//! a solver for the weighted fractional `p`-Laplace eigenvalue problem, and a
//! seeded property harness.

pub mod capacity;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod io;
pub mod nonlocal;
pub mod quad;
pub mod rearrangement;
mod reduce;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{sample, FracParams, Grid, GridFunction, GridSpec, KernelTable, Region, WeightSpec};

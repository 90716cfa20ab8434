//! Time-dependent adaptive mesh generation by stochastic domain decomposition.
//!
//! The computational coordinates `xi`, `eta` solve the time-relaxed Winslow
//! equation `u_t = -(1/w) grad(w) . grad(u) + lap(u)` on a rectangle. Each
//! time step estimates `xi`, `eta` at a few interface points from Monte Carlo
//! paths of the associated diffusion, fills the remaining interface nodes by
//! cubic Hermite interpolation, and then solves every subdomain independently
//! with an implicit finite-difference scheme.

pub mod banded;
pub mod boundary;
pub mod config;
pub mod ddlayout;
pub mod driver;
pub mod error;
pub mod fk;
pub mod geometry;
pub mod hermite;
pub mod io;
pub mod monitor;
pub mod quality;
pub mod sde;
pub mod study;
pub mod subsolver;

pub use error::{Error, Result};

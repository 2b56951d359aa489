//! Topology optimization of Stokes-Darcy flow with level sets on the unit
//! sphere, plus a deflation loop for finding several local minimizers.

pub mod config;
pub mod deflation;
pub mod error;
pub mod fem;
pub mod levelset;
pub mod mesh;
pub mod physics;
pub mod runner;
pub mod toy;
pub mod vtk;

pub use error::{Error, Result};

//! Numerical toolkit for boundary unique continuation of supported
//! Kirchhoff–Love plates: material model, curved-boundary plate solver,
//! conformal flattening, odd reflection, Carleman weights and doubling
//! measurements.

pub mod carleman;
pub mod conformal;
pub mod config;
pub mod doubling;
pub mod error;
pub mod expr;
pub mod flatten;
pub mod fd;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod material;
pub mod pipeline;
pub mod plate_solver;
pub mod plot;
pub mod reflect;

pub use error::{Error, Result};

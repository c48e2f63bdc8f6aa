//! Lyapunov spectra, pressure curves and Markov coding for desk-scale flows
//! with nonpositive curvature along orbits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod error;
pub mod integrate;
pub mod jacobi;
pub mod linalg;
pub mod models;
pub mod orbits;
pub mod runner;
pub mod thermo;

pub use error::{Error, Result};

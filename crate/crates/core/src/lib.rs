//! Fourier-continuation discontinuous Galerkin (FC-DG) toolkit.
//!
//! The crate builds a nodal basis on equispaced points from a discrete
//! periodic extension, assembles reference-element DG operators for it (and
//! for a Legendre/LGL baseline), and drives 1-D and line-based 2-D solvers for
//! linear transport and TE-mode Maxwell problems, together with the spectral
//! and dispersion analysis used to compare the two bases.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dd;
pub mod dg1d;
pub mod discretization;
pub mod error;
pub mod fc_basis;
pub mod harness;
pub mod legendre;
pub mod line_dg2d;
pub mod maxwell2d;
pub mod operators;
pub mod quadrature;
pub mod time_integration;

pub use error::{Error, Result};

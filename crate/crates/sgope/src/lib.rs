//! Finite-volume sine-Gordon correlation functions on the unit disk.
//!
//! The crate evaluates the μ-power series of Coulomb-gas integrals that
//! represents sine-Gordon correlators for `β < 4π`, and checks the singular
//! structure of the derivative-field operator product expansion against it.
//! Supporting pieces live in their own modules:
//!
//! - [`gauss`]: Isserlis sums, Gaussian sampling, complete-the-square identity.
//! - [`green`]: disk Green's function, bumps, mollified covariances.
//! - [`wick`]: mollified field samples and Wick-ordered exponentials.
//! - [`coulomb`]: Coulomb-gas moments, one- and two-point kernels, Onsager checks.
//! - [`forest`]: nearest-neighbour digraphs and two-loop rooted forests.
//! - [`dirichlet`]: simplex integrals and the `U(R)` region integral.
//! - [`series`]: partition function and correlation kernels as μ-series.
//! - [`ope`]: subtracted combinations, radius scans and singular fits.
//!
//! Points of the plane are [`Point`]s, i.e. complex numbers, with the
//! Wirtinger conventions `∂ = (∂₁ − i∂₂)/2` and `∂̄ = (∂₁ + i∂₂)/2`.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coulomb;
pub mod dirichlet;
pub mod error;
pub mod forest;
pub mod gauss;
pub mod green;
pub mod mc;
pub mod ope;
pub mod quad;
pub mod series;
pub mod wick;

pub use error::{Error, ErrorKind, Result};

/// A point of the plane, identified with a complex number.
pub type Point = num_complex::Complex64;

pub use num_complex::Complex64;

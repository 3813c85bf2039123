//! Inverse-scattering pipeline for a two-level Maxwell-Bloch attenuator driven
//! by a periodic boundary pump, with an arbitrary inhomogeneous broadening
//! profile.
//!
//! The crate builds the spectral data of the boundary plane wave, assembles
//! the associated matrix Riemann-Hilbert problem on a deformed contour, solves
//! it by Cauchy-kernel collocation, and reconstructs the field envelope and
//! density-matrix entries.  An independent characteristics integrator of the
//! Maxwell-Bloch equations cross-validates the reconstruction.
//!
//! Module layout follows the pipeline order:
//!
//! * [`broadening`] - spectral-line profiles and their Cauchy-type transforms
//! * [`spectral`] - plane-wave endpoint, branch functions, scattering data
//! * [`phase`] - phase function, level lines, stationary points, signature
//! * [`contour`] - oriented contours (original and deformed) and quadrature
//! * [`rhsolver`] - jump matrices, scalar factor, collocation solver
//! * [`reconstruct`] - field extraction, density matrix, residual checks
//! * [`oracle`] - direct PDE integrator used for cross-validation
//! * [`cli`] - command-line entry points and file exports

// negated comparisons are deliberate where a NaN must fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod broadening;
pub mod cauchy;
pub mod cli;
pub mod config;
pub mod contour;
pub mod error;
pub mod mat2;
pub mod oracle;
pub mod phase;
pub mod quad;
pub mod reconstruct;
pub mod rhsolver;
pub mod spectral;

pub use error::{Error, Result};
pub use mat2::Mat2;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Shorthand constructor for [`C64`].
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Side of an oriented contour piece, as seen walking along its
/// orientation.  Left is the + side of the associated boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

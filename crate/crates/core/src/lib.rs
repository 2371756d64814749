//! Numerical toolkit for the center-of-mass corrected Moser–Trudinger–Onofri
//! inequality on the unit sphere.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`]: Gauss–Legendre × uniform-azimuth quadrature with `∫dω = 1`.
//! - [`harmonics`]: real spherical harmonics orthonormal in `dω`, transforms,
//!   Parseval energies and the spectral Laplacian.
//! - [`functionals`]: `F_α`, `I_α`, mass moments, Euler–Lagrange and
//!   Kazdan–Warner residuals, seeded random fields.
//! - [`closed_form`]: the explicit critical family at `α = 2/3`, the auxiliary
//!   test family and the analytic energy bounds `m(α, a)`.
//! - [`solver`]: constrained minimization of `I_α` with prescribed center of
//!   mass, Newton polishing and continuation in `a`.
//! - [`spectral_analysis`]: second variation, linearized kernel and the
//!   conformally weighted eigenvalue problem.
//! - [`monotonicity`]: Gram-determinant data and the Szegő-type relation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod harmonics;
pub mod monotonicity;
pub mod quadrature;
pub mod solver;
pub mod spectral_analysis;

pub use error::{Error, Result};
pub use grid::UnitSphereGrid;
pub use harmonics::{Coeffs, Field, SpectralBasis};

/// Default band limit.
pub const DEFAULT_L_MAX: usize = 24;
/// Default number of Gauss–Legendre rings.
pub const DEFAULT_N_THETA: usize = 48;
/// Default number of azimuthal nodes per ring.
pub const DEFAULT_N_PHI: usize = 96;

/// Builds the default 48 × 96 grid together with the `L = 24` basis.
pub fn default_basis() -> SpectralBasis {
    let grid = UnitSphereGrid::new(DEFAULT_N_THETA, DEFAULT_N_PHI).expect("default grid is valid");
    SpectralBasis::new(&grid, DEFAULT_L_MAX).expect("default basis is valid")
}

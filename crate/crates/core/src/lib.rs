//! Numerical laboratory for Bergman spaces and Hankel operators on model
//! domains in one and two complex variables.
//!
//! The pipeline is: [`domain`] builds a [`QuadratureRule`] over a model
//! domain, [`bergman`] turns monomials into a numerically orthonormal basis
//! of the Bergman space, [`hankel`] assembles the Gram matrix of the
//! residuals `(I - P)(phi e_n)` and its singular spectrum, and
//! [`diagnostics`] turns families of spectra into compactness verdicts and
//! finite-rank certificates. [`dbar`] holds the one-variable dbar machinery
//! (Cauchy transform, weighted minimal-norm solver, extension operator,
//! shell weights) and [`experiment`] wires everything into reproducible runs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops mirror
// the formulas in the dense kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bergman;
pub mod dbar;
pub mod diagnostics;
pub mod domain;
mod error;
pub mod experiment;
pub mod hankel;
pub(crate) mod linalg;
pub(crate) mod par;
pub mod quadrature;
pub mod symbol;

pub use bergman::{bergman_kernel, gram, orthonormalize, project, GramMatrix, MonomialBasis, OrthonormalBasis};
pub use domain::{Domain, Point};
pub use error::{Error, Result};
pub use quadrature::{build_quadrature, build_lattice_quadrature, QuadratureRule};
pub use symbol::Symbol;

pub use num_complex::Complex64;

/// Crate version recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

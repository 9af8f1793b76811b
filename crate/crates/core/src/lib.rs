//! Turing-like instability analysis for mass-action reaction–diffusion
//! networks that admit a monomial steady-state parametrization.
//!
//! The crate is organized bottom-up:
//!
//! - [`crn`]: networks, stoichiometry, rates, vector field and Jacobian.
//! - [`param`]: monomial parametrizations `c = ψ(k) ∘ ξ^A` and the scalar
//!   conditions specific to the double-phosphorylation model.
//! - [`spectral`]: characteristic polynomial of `J D⁻¹`, sign conditions,
//!   smallest positive root, eigenvalue parity, dispersion relations.
//! - [`domain`]: Neumann Laplacian spectra and domain-size thresholds.
//! - [`rdsim`]: 1D method-of-lines simulator used to verify predictions.
//!
//! The built-in double-phosphorylation network is available as
//! [`models::mapk_dd`].

pub mod crn;
pub mod domain;
pub mod error;
pub mod expr;
pub mod models;
pub mod param;
pub mod rdsim;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;

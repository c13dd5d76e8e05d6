//! Weak Poincaré certificates and variance-decay envelopes for Fourier
//! multiplier semigroups `e^{-t P(D)}`, checked against pseudo-spectral runs.
//!
//! * [`symbols`]: symbols `P(xi)` and numerical checks of their growth conditions
//! * [`fields`]: periodic grids and fields with synchronized Fourier data
//! * [`dos`]: spectral measure, shell DoS estimates, power-law envelopes
//! * [`wpi`]: implicit/explicit WPI bounds, certificates, Nash constants
//! * [`decay`]: variance-decay envelopes and regime classification
//! * [`semigroup`]: exact multiplier evolution and norm traces

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod dos;
pub mod error;
pub mod fields;
pub mod fit;
pub mod quadrature;
pub mod semigroup;
pub mod symbols;
pub mod wpi;

pub use error::{Error, Result};
pub use fields::{GridSpec, SpectralField};
pub use symbols::{Symbol, ValidatedSymbol};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

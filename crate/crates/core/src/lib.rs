//! Numerical laboratory for variable-exponent double phase problems with
//! Kirchhoff factors and critical growth.
//!
//! The crate discretizes a box domain, evaluates Musielak-Orlicz modulars and
//! Luxemburg norms, assembles the energy functionals with their derivatives,
//! derives the explicit parameter thresholds, searches for critical points by
//! descent, and runs bubble-family diagnostics of concentration compactness.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccp;
pub mod config;
pub mod energy;
pub mod error;
pub mod fields;
pub mod kirchhoff;
pub mod ledger;
pub mod mesh;
pub mod modular;
pub mod reaction;
pub mod rng;
pub mod scenario;
pub mod search;
pub mod smooth;
pub mod verify;

pub use error::{Error, Result};

//! Multi-user MIMO downlink precoding with block diagonalization and
//! fixed-complexity vector perturbation.
//!
//! The transmit chain for one channel use is:
//!
//! 1. [`bd::block_diagonalize`] splits the stacked channel into per-user
//!    effective channels with zero inter-user interference.
//! 2. [`precoder::search_factor`] builds the ZF or MMSE precoder of each
//!    effective channel together with the lower-triangular factor `L` that
//!    turns transmit-power minimization into a tree search.
//! 3. An [`perturbation::Encoder`] picks the integer perturbation `t` that
//!    shrinks `‖L (s + τ t)‖²`.
//! 4. [`simulator`] normalizes, transmits, adds noise and undoes the
//!    perturbation at the receiver with the modulo operation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bd;
pub mod channel;
pub mod cli;
mod error;
pub mod linalg;
pub mod perturbation;
pub mod precoder;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};

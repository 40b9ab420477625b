//! Quadrotor simulation and control library.
//!
//! The plant ([`dynamics`]) is flown by a geometric tracking controller
//! ([`control`]) with optional L1 adaptive augmentation ([`l1`]). Rotor
//! commands with and without the augmentation feed a per-propeller damage
//! estimator ([`damage`]), and a supervisor switches to a three-rotor
//! reduced-attitude controller ([`fault_tolerant`]) once a propeller is
//! judged lost. [`harness`] wires it all into reproducible experiments.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod damage;
pub mod dynamics;
pub mod error;
pub mod fault_tolerant;
pub mod harness;
pub mod l1;
pub mod sensor;
pub mod trajectory;

pub use error::{Error, Result};

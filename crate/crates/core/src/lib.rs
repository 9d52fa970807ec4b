//! Spherical-harmonic P_N and collided/uncollided hybrid solvers for the
//! diffusively scaled linear transport equation on a periodic box, with
//! closed-form error-bound evaluators and a verification harness.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod grid;
pub mod harmonics;
pub mod harness;
pub mod hybrid;
pub mod quadrature;
pub mod transport;

pub use error::{Error, Result};

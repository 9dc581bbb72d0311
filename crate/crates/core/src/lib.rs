//! Nonsmooth optimal control by single shooting with lexicographic
//! directional derivatives.
//!
//! The crate is organized bottom-up:
//!
//! * [`ld`] propagates LD-derivatives through smooth and nonsmooth elementals.
//! * [`dae`] integrates semi-explicit index-1 DAEs together with their
//!   LD-derivative sensitivities (implicit trapezoidal rule).
//! * [`ocp`] turns a piecewise-constant control into a Mayer objective and a
//!   generalized-gradient element.
//! * [`nlp`] minimizes over the control parameters with projected, damped BFGS
//!   and an augmented Lagrangian for terminal equalities.
//! * [`wtps`] is the wind-turbine power-system model; [`bench`] holds the
//!   block-move benchmark and the smoothing / finite-difference comparisons.

pub mod bench;
pub mod dae;
pub mod error;
pub mod ld;
pub mod nlp;
pub mod ocp;
pub mod scalar;
pub mod wtps;

pub use error::{Error, Result};
pub use ld::{AugmentedRow, LdError, LdScalar};
pub use scalar::Scalar;

//! Exact-arithmetic laboratory for cost functions.
//!
//! The crate simulates cost-function constructions over a finite horizon
//! with exact rational ledgers. All arithmetic is exact; all runs are
//! deterministic functions of their inputs.

// Error values carry exact rationals for diagnostics.
#![allow(clippy::result_large_err)]

pub mod constructions;
pub mod cost;
pub mod dual;
pub mod gen;
pub mod machine;
pub mod pairing;
pub mod par;
pub mod rational;
pub mod transforms;
pub mod zoo;

pub use rational::Rational;

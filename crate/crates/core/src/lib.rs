//! Deviation and moment bounds for non-homogeneous contractive Markov chains
//! `X_n = F_n(X_{n−1}, ε_n)`, with Monte-Carlo and exact-enumeration checks.

pub mod bounds;
pub mod chains;
pub mod coefficients;
pub mod envelopes;
pub mod erm;
pub mod error;
pub mod moments;
pub mod montecarlo;
pub mod norms;
pub mod par;
pub mod rng;
pub mod sa;
pub mod schedules;
pub mod selftest;

pub use error::{BoundError, Result};

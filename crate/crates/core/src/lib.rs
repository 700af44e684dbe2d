//! Exact and sampled machinery for combinatorial prophet inequalities and
//! secretary problems over small ground sets.
//!
//! * [`setfn`] explicit set functions and their continuous relaxations
//!   (multilinear extension, concave closure, `f*`, `f*_{1/2}`, `f_max`).
//! * [`matroid`] matroid oracles, polytope membership and greedy online
//!   contention resolution schemes.
//! * [`prophet`] the singleton-coupling reduction that drives a greedy OCRS
//!   from one realized item per day.
//! * [`secretary`] the priced-family reduction for monotone subadditive
//!   secretaries under downward-closed constraints.
//! * [`gaps`] verifiers for the relaxation inequalities, each returning a
//!   [`gaps::LemmaVerdict`].

pub mod error;
pub mod gaps;
pub mod matroid;
pub mod prophet;
pub mod secretary;
pub mod setfn;
pub mod stats;
pub mod subset;

pub use error::{Error, Result};
pub use subset::Subset;

/// Absolute tolerance for inequality checks on values normalized to `max f = 1`.
pub const EPS: f64 = 1e-9;

/// Largest ground set for which any operation may enumerate all subsets.
pub const ENUMERATION_LIMIT: usize = 14;

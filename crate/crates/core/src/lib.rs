//! One-counter Markov decision processes (OC-MDPs) under interval strategies.
//!
//! An OC-MDP is a finite MDP whose transitions additionally move a counter by
//! -1, 0 or +1; runs are absorbed at counter zero (and at a finite ceiling,
//! when one is imposed). This crate models OC-MDPs, represents memoryless
//! strategies that are constant on intervals of counter values (open-ended and
//! cyclic interval strategies), and decides verification and realisability
//! questions for state-reachability and selective-termination objectives.
//!
//! The workhorse is a compression of the induced (possibly infinite) Markov
//! chain down to a finite chain over retained configurations, whose transition
//! probabilities are least solutions of monotone quadratic equation systems.
//! Bounded instances are solved exactly over the rationals; unbounded ones get
//! certified numeric brackets; and both verification and realisability
//! questions can be exported as SMT-LIB scripts over nonlinear real
//! arithmetic.

pub mod cli;
pub mod compression;
pub mod eqsys;
pub mod error;
pub mod format;
pub mod generators;
pub mod model;
pub mod partitions;
pub mod realise;
pub mod smt;
pub mod solvers;
pub mod strategies;
pub mod verify;

pub use error::{Error, Result};

/// Exact probability type used everywhere outside the numeric solvers.
pub type Rational = num_rational::BigRational;

/// Counter values; bounds come from binary-encoded inputs and may be huge.
pub type Counter = num_bigint::BigUint;

pub(crate) fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

pub(crate) fn counter(n: u64) -> Counter {
    Counter::from(n)
}

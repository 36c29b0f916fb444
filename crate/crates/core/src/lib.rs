//! Exact verification of closed-form and summation formulas for integer
//! sequences.
//!
//! The crate evaluates formulas written in a small expression language over
//! exact rationals, extracts constant terms of powers of Laurent
//! polynomials, checks θ-operator recurrences, and runs a corpus of formula
//! groups through all of these, reporting agreement item by item.

pub mod arith;
pub mod corpus;
pub mod dsl;
pub mod eval;
pub mod harness;
pub mod laurent;
pub mod theta;

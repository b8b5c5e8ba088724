//! Subdifferentials of integral functionals `E_f(x) = ∫_T f(t, x) dμ(t)` over
//! discretized measure spaces.
//!
//! The measure space is a finite list of weighted atoms. Integrands are
//! evaluation oracles with optional gradient and subdifferential oracles. On
//! top of that the crate provides:
//!
//! * pointwise Fréchet, limiting, singular and Clarke subdifferential
//!   estimates ([`subdiff_point`]),
//! * p-power proximal envelopes and the p-stabilized infimum ([`envelope`]),
//! * Borwein-Preiss sequences and the sequence certificates built on them
//!   ([`bp_sequences`]),
//! * set arithmetic in dimension at most three ([`setvalued`]),
//! * upper-estimate inclusion checks for limiting, singular and Clarke
//!   subdifferentials ([`estimates`]),
//! * a scenario runner with JSON reports and CSV tables ([`scenario`]).
//!
//! Every numerical acceptance is a certificate at a stated resolution, never a
//! proof.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::type_complexity,
    clippy::needless_range_loop
)]

pub mod bp_sequences;
pub mod envelope;
pub mod error;
pub mod estimates;
pub mod extended;
pub mod integrand;
pub mod measure_space;
pub mod minimize;
pub mod scenario;
pub mod setvalued;
pub mod subdiff_point;
pub mod vecops;

pub use error::{Error, Result};
pub use extended::ExtReal;
pub use integrand::{catalog, Integrand, SampledFunction};
pub use measure_space::{Atom, AtomFunction, MeasureSpace};
pub use setvalued::SetRepr;

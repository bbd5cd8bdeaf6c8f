//! Receive-chain budget analysis: cascaded gain, noise figure, IIP3, noise
//! floor and SFDR over frequency, temperature and drive; intermod and mixer
//! spur planning; Touchstone and CSV vendor data; and a time-domain
//! two-tone simulator that checks the closed-form intercept math.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod intermod;
pub mod model;
pub mod par;
pub mod sweeps;
pub mod touchstone;
pub mod twotone;
pub mod units;

pub use cascade::{analyze, analyze_resolved, resolve_chain, CascadeResult, NoiseModel};
pub use error::{Error, Result, Violation};
pub use model::{build_chain, reference_chain, Chain, OperatingPoint, StageKind, StageSpec};
pub use par::Execution;
pub use units::Level;

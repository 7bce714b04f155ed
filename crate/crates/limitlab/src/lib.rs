//! Convergence sweeps of the compressible solver towards the
//! Oberbeck–Boussinesq limit, with reports and acceptance checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use config::SweepConfig;
pub use report::{emit_report, reevaluate, Formats, Verdict};
pub use sweep::{run_sweep, SweepReport};

//! Monte-Carlo experiment harness: parameter sweeps over transmit power,
//! fronthaul power, and array size, with plot-ready CSV output.

pub mod emit;
pub mod sweep;

pub use emit::{emit_convergence_trace, emit_results, hash_bytes, hash_config};
pub use sweep::{run_sweep, SweepCell, SweepResult, SweepSpec, SweptParameter};

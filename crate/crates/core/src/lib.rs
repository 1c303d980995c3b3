//! Uplink compress-and-forward cell-free network: deployment geometry,
//! channel models, exact rate expressions, reference oracles, and an
//! alternating inner-approximation optimizer for the joint transmit /
//! quantization / fronthaul power design.

pub mod combining;
pub mod config;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod rates;
pub mod scenario;
pub mod solver;

pub use combining::{build_combiner, fronthaul_capacity, CombinerSet, Scheme};
pub use config::{load_config, SolverSettings, SystemConfig};
pub use error::{CranError, Result};
pub use rates::{check_feasibility, DesignVariables, FeasibilityReport};
pub use scenario::ChannelRealization;
pub use solver::{initialize, mm_solve, MMTrace, SolveRecord, SolveResult, SolveStatus};

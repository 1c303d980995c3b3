//! Sweep execution: one independent channel draw per trial, shared across
//! every (scheme, value) cell so curves differ only in the swept knob.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use cran_mm_core::combining::{build_combiner, Scheme};
use cran_mm_core::config::{dbm_to_watts, SystemConfig};
use cran_mm_core::scenario::ChannelRealization;
use cran_mm_core::solver::SolveStatus;
use cran_mm_core::{mm_solve, CranError};

use crate::emit::hash_config;

/// Which knob varies across the sweep. Serialized names double as the
/// `swept_parameter` CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweptParameter {
    #[serde(rename = "P_UE_dbm")]
    PUeDbm,
    #[serde(rename = "P_H_max_dbm")]
    PHMaxDbm,
    #[serde(rename = "N_C")]
    NC,
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweptParameter::PUeDbm => "P_UE_dbm",
            SweptParameter::PHMaxDbm => "P_H_max_dbm",
            SweptParameter::NC => "N_C",
        })
    }
}

/// A full sweep request. Power values are dBm at this boundary and become
/// watts before they reach the solver; N_C values are element counts.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub swept_parameter: SweptParameter,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub base: SystemConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("sweep needs at least one value");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            bail!("sweep values must be finite");
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            bail!("sweep values must be sorted strictly ascending");
        }
        if self.swept_parameter == SweptParameter::NC
            && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
        {
            bail!("N_C values must be whole element counts of at least 1");
        }
        if self.trials == 0 {
            bail!("a sweep needs at least one trial");
        }
        let mut seen = [false; 2];
        for scheme in &self.schemes {
            let slot = &mut seen[*scheme as usize];
            if *slot {
                bail!("scheme {scheme} listed twice");
            }
            *slot = true;
        }
        self.base.validate()?;
        Ok(())
    }

    /// The base config with one sweep value applied.
    fn config_at(&self, value: f64) -> SystemConfig {
        let mut cfg = self.base.clone();
        match self.swept_parameter {
            SweptParameter::PUeDbm => cfg.P_UE = dbm_to_watts(value),
            SweptParameter::PHMaxDbm => cfg.P_H_max = dbm_to_watts(value),
            SweptParameter::NC => cfg.N_C = value as usize,
        }
        cfg
    }
}

/// Aggregated statistics for one (scheme, value) cell.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub value: f64,
    pub mean_sum_rate: f64,
    /// Sample standard deviation of the mean; zero for a single trial.
    pub stderr: f64,
    /// Trials that produced a usable solve; `trials + failures` is the request.
    pub trials: usize,
    pub mean_iters: f64,
    pub failures: usize,
    /// False when every trial failed; such cells emit empty statistics.
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Cells ordered by scheme (spec order), then value ascending.
    pub cells: Vec<SweepCell>,
    /// SHA-256 of the source config: raw file bytes when the CLI loaded one,
    /// canonical JSON otherwise.
    pub config_hash: String,
}

struct TrialOutcome {
    /// Per cell: (sum_rate, iterations) on success.
    cells: Vec<Option<(f64, usize)>>,
    warnings: Vec<String>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let n_cells = spec.schemes.len() * spec.values.len();

    let outcomes: Vec<TrialOutcome> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(spec, trial, n_cells))
        .collect();
    for warning in outcomes.iter().flat_map(|o| &o.warnings) {
        eprintln!("warning: {warning}");
    }

    let mut cells = Vec::with_capacity(n_cells);
    for (si, &scheme) in spec.schemes.iter().enumerate() {
        for (vi, &value) in spec.values.iter().enumerate() {
            let idx = si * spec.values.len() + vi;
            let mut rates = Vec::with_capacity(spec.trials);
            let mut iters = 0usize;
            for outcome in &outcomes {
                if let Some((rate, it)) = outcome.cells[idx] {
                    rates.push(rate);
                    iters += it;
                }
            }
            let n = rates.len();
            let (mean, stderr) = mean_and_stderr(&rates);
            cells.push(SweepCell {
                scheme,
                value,
                mean_sum_rate: mean,
                stderr,
                trials: n,
                mean_iters: if n > 0 { iters as f64 / n as f64 } else { f64::NAN },
                failures: spec.trials - n,
                valid: n > 0,
            });
        }
    }

    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        config_hash: hash_config(&spec.base),
    })
}

fn run_trial(spec: &SweepSpec, trial: u64, n_cells: usize) -> TrialOutcome {
    let mut outcome = TrialOutcome {
        cells: vec![None; n_cells],
        warnings: Vec::new(),
    };
    let drawn = match ChannelRealization::sample(&spec.base, spec.base.seed, trial) {
        Ok(r) => r,
        Err(err) => {
            outcome
                .warnings
                .push(format!("trial {trial}: channel draw failed: {err}"));
            return outcome;
        }
    };

    for (vi, &value) in spec.values.iter().enumerate() {
        let cfg = spec.config_at(value);
        // Array resizing changes the fronthaul channels but reuses the same
        // topology and access draws; power changes reuse everything.
        let resized = (spec.swept_parameter == SweptParameter::NC).then(|| {
            ChannelRealization::from_parts(drawn.topology.clone(), drawn.h.clone(), &cfg)
        });
        let realization = resized.as_ref().unwrap_or(&drawn);

        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let idx = si * spec.values.len() + vi;
            match solve_cell(realization, scheme, &cfg) {
                Ok(r) => outcome.cells[idx] = Some(r),
                Err(err) => outcome.warnings.push(format!(
                    "trial {trial} {scheme} {}={value}: {err}",
                    spec.swept_parameter
                )),
            }
        }
    }
    outcome
}

fn solve_cell(
    realization: &ChannelRealization,
    scheme: Scheme,
    cfg: &SystemConfig,
) -> std::result::Result<(f64, usize), CranError> {
    let combiner = build_combiner(&realization.b, &realization.g, scheme)?;
    let result = mm_solve(realization, &combiner, cfg)?;
    if result.trace.status == SolveStatus::SubproblemFailed {
        return Err(CranError::SubproblemFailed(format!(
            "gave up after {} iterations",
            result.trace.iterations
        )));
    }
    Ok((result.sum_rate, result.trace.iterations))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

//! Result persistence: plot-ready CSVs plus a JSON sidecar carrying
//! everything needed to reproduce a run.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cran_mm_core::config::SystemConfig;
use cran_mm_core::SolveResult;

use crate::sweep::{SweepResult, SweptParameter};

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Hash of the canonical JSON form, for configs that never lived in a file.
pub fn hash_config(cfg: &SystemConfig) -> String {
    hash_bytes(&serde_json::to_vec(cfg).expect("config serializes"))
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    config: &'a SystemConfig,
    seed: u64,
    version: &'static str,
    config_hash: &'a str,
    swept_parameter: SweptParameter,
    values: &'a [f64],
    schemes: Vec<String>,
    trials: usize,
    /// The only non-deterministic field, deliberately kept out of the CSV.
    timestamp_unix_s: u64,
}

/// Writes `sweep.csv` and `sweep_meta.json` under `out_dir` and returns both
/// paths. Invalid cells keep their identity columns but emit empty statistics.
pub fn emit_results(result: &SweepResult, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let csv_path = out_dir.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("opening {}", csv_path.display()))?;
    writer.write_record([
        "scheme",
        "swept_parameter",
        "value",
        "mean_sum_rate",
        "stderr",
        "trials",
        "mean_iters",
    ])?;
    let parameter = result.spec.swept_parameter.to_string();
    for cell in &result.cells {
        let identity = [cell.scheme.to_string(), parameter.clone(), cell.value.to_string()];
        let stats = if cell.valid {
            [
                cell.mean_sum_rate.to_string(),
                cell.stderr.to_string(),
                cell.trials.to_string(),
                cell.mean_iters.to_string(),
            ]
        } else {
            [String::new(), String::new(), "0".to_string(), String::new()]
        };
        writer.write_record(identity.iter().chain(&stats))?;
    }
    writer.flush()?;

    let meta = SweepMeta {
        config: &result.spec.base,
        seed: result.spec.base.seed,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &result.config_hash,
        swept_parameter: result.spec.swept_parameter,
        values: &result.spec.values,
        schemes: result.spec.schemes.iter().map(|s| s.to_string()).collect(),
        trials: result.spec.trials,
        timestamp_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let meta_path = out_dir.join("sweep_meta.json");
    let mut body = serde_json::to_string_pretty(&meta)?;
    body.push('\n');
    fs::write(&meta_path, body)
        .with_context(|| format!("writing {}", meta_path.display()))?;

    Ok((csv_path, meta_path))
}

/// Writes an iteration-versus-objective CSV; row 0 is the starting point.
pub fn emit_convergence_trace(result: &SolveResult, out_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(out_path)
        .with_context(|| format!("opening {}", out_path.display()))?;
    writer.write_record(["iteration", "objective"])?;
    for (i, objective) in result.trace.objective_per_iter.iter().enumerate() {
        writer.write_record([i.to_string(), objective.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

//! System configuration: geometry, radio parameters, and solver settings.
//!
//! All powers inside the library are linear watts and all rates are
//! bits/channel use; dBm appears only at the CLI boundary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CranError, Result};

/// Tolerances and iteration limits for the alternating minorization loop.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when |obj_t - obj_{t-1}| <= rel_tol * max(1, |obj_t|).
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Uniform tolerance on constraint residuals.
    #[serde(default = "default_feas_tol")]
    pub feas_tol: f64,
    /// Relative floor keeping quantization covariances away from singularity.
    #[serde(default = "default_psd_floor")]
    pub psd_floor: f64,
    /// Eigenvalue cutoff (relative to the largest) when factoring covariances
    /// into precoders.
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_max_iters() -> usize {
    50
}
fn default_rel_tol() -> f64 {
    1e-4
}
fn default_feas_tol() -> f64 {
    1e-6
}
fn default_psd_floor() -> f64 {
    1e-9
}
fn default_rank_tol() -> f64 {
    1e-8
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
            feas_tol: default_feas_tol(),
            psd_floor: default_psd_floor(),
            rank_tol: default_rank_tol(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(CranError::InvalidConfig("solver.max_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("solver.rel_tol", self.rel_tol),
            ("solver.feas_tol", self.feas_tol),
            ("solver.psd_floor", self.psd_floor),
            ("solver.rank_tol", self.rank_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CranError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Full description of one network instance. Field names double as the JSON
/// config keys.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of UEs.
    pub K: usize,
    /// Number of RRHs.
    pub L: usize,
    /// Antennas per UE, length K.
    pub N_U: Vec<usize>,
    /// Receive antennas per RRH, length L.
    pub N_H: Vec<usize>,
    /// CU array elements.
    pub N_C: usize,
    /// Per-UE transmit power budget, watts.
    pub P_UE: f64,
    /// Per-RRH fronthaul transmit power cap, watts.
    pub P_H_max: f64,
    /// CU receiver noise power, watts.
    pub sigma2_CU: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// CU element spacing over wavelength.
    #[serde(default = "default_spacing_ratio")]
    pub antenna_spacing_ratio: f64,
    /// Per-UE rate weights, length K. Empty means all ones.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Side length of the square deployment area, meters. The CU sits at the
    /// center.
    pub area_m: f64,
    pub min_rrh_cu_m: f64,
    pub min_rrh_rrh_m: f64,
    pub h_rrh_m: f64,
    pub h_ue_m: f64,
    pub noise_figure_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_spacing_ratio() -> f64 {
    0.5
}

impl SystemConfig {
    /// Small but fully featured profile used by docs, tests, and as a
    /// starting point for config files.
    pub fn desk_default() -> Self {
        Self {
            K: 4,
            L: 4,
            N_U: vec![2; 4],
            N_H: vec![2; 4],
            N_C: 50,
            P_UE: dbm_to_watts(20.0),
            P_H_max: dbm_to_watts(30.0),
            sigma2_CU: thermal_noise_watts(20e6, 5.0),
            carrier_hz: 1.9e9,
            bandwidth_hz: 20e6,
            antenna_spacing_ratio: 0.5,
            weights: vec![1.0; 4],
            area_m: 1000.0,
            min_rrh_cu_m: 10.0,
            min_rrh_rrh_m: 100.0,
            h_rrh_m: 22.5,
            h_ue_m: 1.5,
            noise_figure_db: 5.0,
            seed: 1,
            solver: SolverSettings::default(),
        }
    }

    pub fn total_rx_antennas(&self) -> usize {
        self.N_H.iter().sum()
    }

    /// Weights with the empty-means-ones convention applied.
    pub fn effective_weights(&self) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0; self.K]
        } else {
            self.weights.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CranError::InvalidConfig(m));
        if self.K == 0 || self.L == 0 {
            return err("K and L must be >= 1".into());
        }
        if self.N_U.len() != self.K {
            return err(format!("N_U has {} entries, expected K={}", self.N_U.len(), self.K));
        }
        if self.N_H.len() != self.L {
            return err(format!("N_H has {} entries, expected L={}", self.N_H.len(), self.L));
        }
        if self.N_U.iter().any(|&n| n == 0) || self.N_H.iter().any(|&n| n == 0) {
            return err("antenna counts must be >= 1".into());
        }
        if self.N_C == 0 {
            return err("N_C must be >= 1".into());
        }
        if self.N_C < self.L {
            return err(format!("N_C={} must be >= L={} for the fronthaul array", self.N_C, self.L));
        }
        for (name, v) in [
            ("P_UE", self.P_UE),
            ("P_H_max", self.P_H_max),
            ("sigma2_CU", self.sigma2_CU),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("antenna_spacing_ratio", self.antenna_spacing_ratio),
            ("area_m", self.area_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("min_rrh_cu_m", self.min_rrh_cu_m),
            ("min_rrh_rrh_m", self.min_rrh_rrh_m),
            ("h_rrh_m", self.h_rrh_m),
            ("h_ue_m", self.h_ue_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return err("noise_figure_db must be finite".into());
        }
        if self.min_rrh_cu_m >= self.area_m / 2.0 {
            return err("min_rrh_cu_m leaves no room inside the area".into());
        }
        if !self.weights.is_empty() {
            if self.weights.len() != self.K {
                return err(format!(
                    "weights has {} entries, expected K={} (or empty for uniform)",
                    self.weights.len(),
                    self.K
                ));
            }
            if self.weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                return err("weights must be nonnegative and finite".into());
            }
        }
        self.solver.validate()
    }
}

/// Loads and validates a config file (JSON).
pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: SystemConfig =
        serde_json::from_str(&text).map_err(|e| CranError::InvalidConfig(format!("{path:?}: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Thermal noise power over `bandwidth_hz` with the given noise figure:
/// -174 dBm/Hz + 10 log10(B) + NF, converted to watts.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

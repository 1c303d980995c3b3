//! Alternating minorize-maximize driver.
//!
//! Each round linearizes the non-concave pieces at the current point and
//! maximizes the resulting concave subproblem. Because every surrogate is an
//! inner approximation that touches the true problem at the anchor, iterates
//! stay feasible and the true objective never decreases.

pub mod atoms;
pub mod barrier;
pub mod layout;
pub mod surrogate;

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combining::{fronthaul_capacity, CombinerSet};
use crate::config::SystemConfig;
use crate::error::{CranError, Result};
use crate::linalg::{identity, CMat};
use crate::rates::{check_feasibility, per_user_rates, weighted_sum_rate, DesignVariables};
use crate::scenario::ChannelRealization;

pub use barrier::{BarrierSolver, SubproblemSolver};
pub use surrogate::{assemble_surrogate, interior_start, solve_surrogate, solve_surrogate_with, SurrogateProblem};

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    SubproblemFailed,
}

/// Per-iteration history of one solve. `objective_per_iter[0]` is the value
/// at the starting point, so the vector holds `iterations + 1` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MMTrace {
    pub objective_per_iter: Vec<f64>,
    pub worst_violation_per_iter: Vec<f64>,
    /// Number of subproblems solved.
    pub iterations: usize,
    pub status: SolveStatus,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub vars: DesignVariables,
    /// Tall precoder factors V_k with F_k = V_k V_k^H, one per UE.
    pub precoders: Vec<CMat>,
    pub per_user_rates: Vec<f64>,
    /// Weighted sum rate at the final point.
    pub sum_rate: f64,
    pub trace: MMTrace,
}

/// Feasible starting point: full transmit covariances, full fronthaul power,
/// and isotropic quantization bisected so each compression rate sits just
/// under the fronthaul capacity.
pub fn initialize(
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<DesignVariables> {
    let f: Vec<CMat> = cfg
        .N_U
        .iter()
        .map(|&n| identity(n) * Complex64::new(cfg.P_UE / n as f64, 0.0))
        .collect();
    let p = vec![cfg.P_H_max; cfg.L];
    let alpha = fronthaul_capacity(combiner, &p, cfg.sigma2_CU)?;

    let mut omega = Vec::with_capacity(cfg.L);
    for l in 0..cfg.L {
        if alpha[l] <= 0.0 {
            return Err(CranError::Infeasible(format!(
                "fronthaul stream {l} has zero capacity; no quantization level fits"
            )));
        }
        let m_l = cfg.N_H[l];
        let mut a = identity(m_l);
        for (k, fk) in f.iter().enumerate() {
            let hlk = &channels.h[l][k];
            a += hlk * fk * hlk.adjoint();
        }
        // gamma(kappa) = sum_i log2(1 + zeta_i / kappa) for Omega = kappa I.
        let zeta: Vec<f64> = a.symmetric_eigenvalues().iter().map(|z| z.max(0.0)).collect();
        let margin = (alpha[l] / 2.0).min(1e-6);
        let kappa = bisect_kappa(&zeta, alpha[l] - margin);
        omega.push(identity(m_l) * Complex64::new(kappa, 0.0));
    }

    Ok(DesignVariables { f, omega, p })
}

/// Smallest kappa (up to a relative tolerance) whose isotropic quantization
/// meets `gamma(kappa) <= target`. gamma is continuous and strictly
/// decreasing from +inf to 0, so the log-space bisection always lands.
fn bisect_kappa(zeta: &[f64], target: f64) -> f64 {
    let gamma = |kappa: f64| zeta.iter().map(|&z| (1.0 + z / kappa).log2()).sum::<f64>();
    let mut hi = 1.0;
    let mut guard = 0;
    while gamma(hi) > target && guard < 2000 {
        hi *= 4.0;
        guard += 1;
    }
    let mut lo = hi.min(1.0);
    guard = 0;
    while gamma(lo) < target && guard < 2000 {
        lo /= 4.0;
        guard += 1;
    }
    for _ in 0..200 {
        if hi <= lo * (1.0 + 1e-6) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if gamma(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Runs the full alternating ascent from the canonical starting point.
///
/// A subproblem failure is not fatal: the best feasible iterate found so far
/// is returned with the status recording the early stop.
pub fn mm_solve(
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    let settings = &cfg.solver;
    let weights = cfg.effective_weights();

    let mut vars = initialize(channels, combiner, cfg)?;
    let mut obj = weighted_sum_rate(&vars, channels, &weights, settings)?;
    let mut objective_per_iter = vec![obj];
    let mut worst_violation_per_iter =
        vec![check_feasibility(&vars, channels, combiner, cfg).worst_violation];
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIters;

    for _ in 0..settings.max_iters {
        let step = assemble_surrogate(&vars, channels, combiner, cfg).and_then(|sp| {
            #[cfg(debug_assertions)]
            if let Some(at_anchor) = sp.objective_at(&vars) {
                debug_assert!(
                    (at_anchor - obj).abs() <= 1e-9 * obj.abs().max(1.0),
                    "surrogate detached from the objective at the anchor: {at_anchor} vs {obj}"
                );
            }
            solve_surrogate(&sp)
        });
        let new_vars = match step {
            Ok((v, _)) => v,
            Err(_) => {
                status = SolveStatus::SubproblemFailed;
                break;
            }
        };
        let new_obj = match weighted_sum_rate(&new_vars, channels, &weights, settings) {
            Ok(v) => v,
            Err(_) => {
                status = SolveStatus::SubproblemFailed;
                break;
            }
        };
        vars = new_vars;
        iterations += 1;
        objective_per_iter.push(new_obj);
        worst_violation_per_iter
            .push(check_feasibility(&vars, channels, combiner, cfg).worst_violation);
        let delta = (new_obj - obj).abs();
        obj = new_obj;
        if delta <= settings.rel_tol * new_obj.abs().max(1.0) {
            status = SolveStatus::Converged;
            break;
        }
    }

    let per_user = per_user_rates(&vars, channels, settings)?;
    let sum_rate = per_user.iter().zip(&weights).map(|(r, w)| r * w).sum();
    let precoders = recover_precoders(&vars.f, settings.rank_tol);
    Ok(SolveResult {
        vars,
        precoders,
        per_user_rates: per_user,
        sum_rate,
        trace: MMTrace {
            objective_per_iter,
            worst_violation_per_iter,
            iterations,
            status,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Factors each covariance as V V^H, keeping eigenpairs above
/// `rank_tol * lambda_max`. Columns are ordered by descending eigenvalue;
/// a zero matrix factors into zero columns.
pub fn recover_precoders(f: &[CMat], rank_tol: f64) -> Vec<CMat> {
    f.iter()
        .map(|fk| {
            let sym = (fk + fk.adjoint()).scale(0.5);
            let n = sym.nrows();
            let eig = sym.symmetric_eigen();
            let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            if lambda_max <= 0.0 {
                return CMat::zeros(n, 0);
            }
            let mut order: Vec<usize> = (0..n)
                .filter(|&i| eig.eigenvalues[i] > rank_tol * lambda_max)
                .collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[b]
                    .partial_cmp(&eig.eigenvalues[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut v = CMat::zeros(n, order.len());
            for (c, &i) in order.iter().enumerate() {
                let scale = Complex64::new(eig.eigenvalues[i].sqrt(), 0.0);
                v.column_mut(c).copy_from(&(eig.eigenvectors.column(i) * scale));
            }
            v
        })
        .collect()
}

/// Dense complex matrix in plain JSON-friendly form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMat> for MatrixRecord {
    fn from(m: &CMat) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        let mut re = vec![vec![0.0; cols]; rows];
        let mut im = vec![vec![0.0; cols]; rows];
        for i in 0..rows {
            for j in 0..cols {
                re[i][j] = m[(i, j)].re;
                im[i][j] = m[(i, j)].im;
            }
        }
        Self { re, im }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> CMat {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        DMatrix::from_fn(rows, cols, |i, j| Complex64::new(self.re[i][j], self.im[i][j]))
    }
}

/// Full solve output in a serializable shape.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRecord {
    pub config_hash: String,
    pub seed: u64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub objective_per_iter: Vec<f64>,
    pub worst_violation_per_iter: Vec<f64>,
    pub sum_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub F: Vec<MatrixRecord>,
    pub Omega: Vec<MatrixRecord>,
    pub p: Vec<f64>,
    pub precoders: Vec<MatrixRecord>,
}

impl SolveResult {
    pub fn to_record(&self, config_hash: &str, seed: u64) -> SolveRecord {
        SolveRecord {
            config_hash: config_hash.to_owned(),
            seed,
            status: self.trace.status,
            iterations: self.trace.iterations,
            wall_time_s: self.trace.wall_time_s,
            objective_per_iter: self.trace.objective_per_iter.clone(),
            worst_violation_per_iter: self.trace.worst_violation_per_iter.clone(),
            sum_rate: self.sum_rate,
            per_user_rates: self.per_user_rates.clone(),
            F: self.vars.f.iter().map(MatrixRecord::from).collect(),
            Omega: self.vars.omega.iter().map(MatrixRecord::from).collect(),
            p: self.vars.p.clone(),
            precoders: self.precoders.iter().map(MatrixRecord::from).collect(),
        }
    }
}

//! User rates, compression rates, the log-det linearization, and feasibility
//! checking.
//!
//! Rates are bits per channel use throughout (base-2 logs).

use crate::combining::{fronthaul_capacity, CombinerSet};
use crate::config::{SolverSettings, SystemConfig};
use crate::error::{CranError, Result};
use crate::linalg::{
    block_diag, hermitize, identity, log2_det_pd, min_eigenvalue, pd_cholesky, pd_inverse,
    trace_product_re, trace_re, CMat, LN_2,
};
use crate::scenario::ChannelRealization;

/// One candidate operating point: transmit covariances, quantization noise
/// covariances, and RRH powers.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVariables {
    /// Per-UE transmit covariance, N_U[k] square.
    pub f: Vec<CMat>,
    /// Per-RRH quantization noise covariance, N_H[l] square.
    pub omega: Vec<CMat>,
    /// Per-RRH fronthaul transmit power, watts.
    pub p: Vec<f64>,
}

impl DesignVariables {
    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self {
            f: cfg.N_U.iter().map(|&n| CMat::zeros(n, n)).collect(),
            omega: cfg.N_H.iter().map(|&m| CMat::zeros(m, m)).collect(),
            p: vec![0.0; cfg.L],
        }
    }
}

/// Signed constraint margins for one point; positive means satisfied.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// alpha_l - gamma_l per RRH.
    pub compression_margin: Vec<f64>,
    /// P_UE - tr(F_k) per UE.
    pub ue_power_margin: Vec<f64>,
    /// min(p_l, P_H_max - p_l) per RRH.
    pub rrh_power_margin: Vec<f64>,
    /// Minimum eigenvalue of each F_k.
    pub f_min_eig: Vec<f64>,
    /// Minimum eigenvalue of each Omega_l.
    pub omega_min_eig: Vec<f64>,
    /// Most negative margin across all families.
    pub worst_violation: f64,
}

fn validate_covariances(vars: &DesignVariables, settings: &SolverSettings) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let mut f = Vec::with_capacity(vars.f.len());
    for x in &vars.f {
        let h = hermitize(x)?;
        let min = min_eigenvalue(&h);
        if min < -settings.feas_tol {
            return Err(CranError::NotPsd(min));
        }
        f.push(h);
    }
    let mut omega = Vec::with_capacity(vars.omega.len());
    for x in &vars.omega {
        let h = hermitize(x)?;
        let min = min_eigenvalue(&h);
        if min < -settings.feas_tol {
            return Err(CranError::NotPsd(min));
        }
        omega.push(h);
    }
    Ok((f, omega))
}

/// Signal-plus-interference-plus-noise covariance at the CU after
/// decompression: sum_j H_j F_j H_j^H + I + blockdiag(Omega), with UE `skip`
/// left out when given.
pub(crate) fn cu_covariance(
    f: &[CMat],
    omega_block: &CMat,
    channels: &ChannelRealization,
    skip: Option<usize>,
) -> CMat {
    let n = omega_block.nrows();
    let mut s = identity(n) + omega_block;
    for (j, fj) in f.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let hj = channels.stacked_channel(j);
        s += &hj * fj * hj.adjoint();
    }
    s
}

/// Achievable rate of UE k with interference treated as noise.
pub fn user_rate(
    k: usize,
    vars: &DesignVariables,
    channels: &ChannelRealization,
    settings: &SolverSettings,
) -> Result<f64> {
    Ok(per_user_rates(vars, channels, settings)?[k])
}

/// All K user rates; the total covariance is factored once.
pub fn per_user_rates(
    vars: &DesignVariables,
    channels: &ChannelRealization,
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let (f, omega) = validate_covariances(vars, settings)?;
    let omega_block = block_diag(&omega);
    let total = cu_covariance(&f, &omega_block, channels, None);
    let log_total = log2_det_pd(&total, settings.psd_floor)?;
    (0..f.len())
        .map(|k| {
            let rest = cu_covariance(&f, &omega_block, channels, Some(k));
            Ok(log_total - log2_det_pd(&rest, settings.psd_floor)?)
        })
        .collect()
}

/// Fronthaul bits RRH l must spend to forward its observation with
/// quantization noise Omega_l.
pub fn compression_rate(
    l: usize,
    vars: &DesignVariables,
    channels: &ChannelRealization,
    settings: &SolverSettings,
) -> Result<f64> {
    let (f, omega) = validate_covariances(vars, settings)?;
    compression_rate_validated(l, &f, &omega[l], channels, settings)
}

fn compression_rate_validated(
    l: usize,
    f: &[CMat],
    omega_l: &CMat,
    channels: &ChannelRealization,
    settings: &SolverSettings,
) -> Result<f64> {
    let m = omega_l.nrows();
    let mut z = identity(m) + omega_l;
    for (k, fk) in f.iter().enumerate() {
        let hlk = &channels.h[l][k];
        z += hlk * fk * hlk.adjoint();
    }
    // Omega must be strictly invertible for the quantization model to make
    // sense; clamping here would silently change the rate.
    let log_omega = match pd_cholesky(omega_l) {
        Some(chol) => {
            let lmat = chol.l_dirty();
            2.0 * (0..m).map(|i| lmat[(i, i)].re.ln()).sum::<f64>() / LN_2
        }
        None => {
            let eigs = omega_l.symmetric_eigenvalues();
            let cond = eigs.max() / eigs.min().abs().max(f64::MIN_POSITIVE);
            return Err(CranError::SingularMatrix { context: "quantization covariance", cond });
        }
    };
    Ok(log2_det_pd(&z, settings.psd_floor)? - log_omega)
}

/// Weighted sum of user rates.
pub fn weighted_sum_rate(
    vars: &DesignVariables,
    channels: &ChannelRealization,
    weights: &[f64],
    settings: &SolverSettings,
) -> Result<f64> {
    let rates = per_user_rates(vars, channels, settings)?;
    if weights.len() != rates.len() {
        return Err(CranError::ShapeMismatch(format!(
            "{} weights for {} users",
            weights.len(),
            rates.len()
        )));
    }
    Ok(rates.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// First-order expansion of log2 det at X0, evaluated at X:
/// xi = log2 det X0 + tr(X0^{-1} (X - X0)) / ln 2.
///
/// For Hermitian PD X this upper-bounds log2 det X with equality at X = X0.
pub fn linearize_logdet(x: &CMat, x0: &CMat) -> Result<f64> {
    let x = hermitize(x)?;
    let x0 = hermitize(x0)?;
    if x.nrows() != x0.nrows() {
        return Err(CranError::ShapeMismatch(format!(
            "X is {}x{} but X0 is {}x{}",
            x.nrows(),
            x.ncols(),
            x0.nrows(),
            x0.ncols()
        )));
    }
    let x0_inv = pd_inverse(&x0, "linearization anchor")?;
    let log_det_x0 = log2_det_pd(&x0, 0.0)?;
    let n = x0.nrows() as f64;
    Ok(log_det_x0 + (trace_product_re(&x0_inv, &x) - n) / LN_2)
}

/// Evaluates every original constraint at `vars` and reports signed margins.
/// Never fails: structurally broken inputs show up as -inf margins.
pub fn check_feasibility(
    vars: &DesignVariables,
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> FeasibilityReport {
    let settings = &cfg.solver;
    let f: Vec<CMat> = vars.f.iter().map(|x| (x + x.adjoint()).scale(0.5)).collect();
    let omega: Vec<CMat> = vars.omega.iter().map(|x| (x + x.adjoint()).scale(0.5)).collect();

    let f_min_eig: Vec<f64> = f.iter().map(min_eigenvalue).collect();
    let omega_min_eig: Vec<f64> = omega.iter().map(min_eigenvalue).collect();

    let ue_power_margin: Vec<f64> = f.iter().map(|fk| cfg.P_UE - trace_re(fk)).collect();
    let rrh_power_margin: Vec<f64> = vars.p.iter().map(|&p| p.min(cfg.P_H_max - p)).collect();

    // alpha needs nonnegative powers; the sign violation is already recorded
    // in rrh_power_margin.
    let p_clamped: Vec<f64> = vars.p.iter().map(|&p| p.max(0.0)).collect();
    let alpha = fronthaul_capacity(combiner, &p_clamped, cfg.sigma2_CU)
        .unwrap_or_else(|_| vec![f64::NEG_INFINITY; cfg.L]);

    let compression_margin: Vec<f64> = (0..cfg.L)
        .map(|l| {
            match compression_rate_validated(l, &f, &omega[l], channels, settings) {
                Ok(gamma) => alpha[l] - gamma,
                // Singular Omega: gamma diverges, so the margin does too.
                Err(_) => f64::NEG_INFINITY,
            }
        })
        .collect();

    let worst_violation = compression_margin
        .iter()
        .chain(&ue_power_margin)
        .chain(&rrh_power_margin)
        .chain(&f_min_eig)
        .chain(&omega_min_eig)
        .fold(f64::INFINITY, |acc, &m| acc.min(m));

    FeasibilityReport {
        compression_margin,
        ue_power_margin,
        rrh_power_margin,
        f_min_eig,
        omega_min_eig,
        worst_violation,
    }
}

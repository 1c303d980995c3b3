//! Independent reference answers for small instances.
//!
//! Two oracles: a closed form for the single-UE single-RRH single-antenna
//! network, and a brute-force grid search over diagonally restricted
//! variables. Both are deliberately written against the model equations
//! directly, not against the solver's internals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::combining::CombinerSet;
use crate::config::SystemConfig;
use crate::error::{CranError, Result};
use crate::linalg::CMat;
use crate::rates::{check_feasibility, weighted_sum_rate, DesignVariables};
use crate::scenario::{trial_rng, ChannelRealization, Topology};
use crate::solver::initialize;

/// Largest total variable count (diagonal entries plus powers) the grid
/// search will enumerate.
pub const GRID_DIM_LIMIT: usize = 6;

/// One single-UE, single-RRH, single-antenna network. The access channel is
/// already noise normalized; `sigma2` is the CU noise floor.
#[derive(Debug, Clone)]
pub struct ScalarInstance {
    pub h: Complex64,
    pub beta_fronthaul: f64,
    pub n_c: usize,
    pub sigma2: f64,
    pub p_ue: f64,
    pub p_h_max: f64,
}

/// Analytic optimum of a scalar instance.
#[derive(Debug, Clone)]
pub struct ScalarSolution {
    pub f: f64,
    pub omega: f64,
    pub p: f64,
    pub alpha: f64,
    pub rate: f64,
}

/// The scalar problem in closed form. Both budgets bind (the end-to-end rate
/// is increasing in F and in p even after re-tightening the quantization),
/// and the compression constraint binds, which pins omega:
///
///   alpha = log2(1 + beta N_C p / sigma2)
///   omega = (1 + |h|^2 F) / (2^alpha - 1)
///   rate  = log2(1 + |h|^2 F / (1 + omega))
///
/// A dead fronthaul (alpha = 0) admits no finite quantization level; the
/// rate is 0 and omega diverges.
pub fn scalar_closed_form(inst: &ScalarInstance) -> ScalarSolution {
    let g = inst.h.norm_sqr();
    let f = inst.p_ue;
    let p = inst.p_h_max;
    let alpha = (1.0 + inst.beta_fronthaul * inst.n_c as f64 * p / inst.sigma2).log2();
    if alpha <= 0.0 {
        return ScalarSolution { f, omega: f64::INFINITY, p, alpha, rate: 0.0 };
    }
    let omega = (1.0 + g * f) / ((2.0f64).powf(alpha) - 1.0);
    let rate = (1.0 + g * f / (1.0 + omega)).log2();
    ScalarSolution { f, omega, p, alpha, rate }
}

impl ScalarInstance {
    /// Materializes the instance as a 1x1x1 system the solver stack accepts.
    pub fn to_system(&self) -> Result<(SystemConfig, ChannelRealization)> {
        let mut cfg = SystemConfig::desk_default();
        cfg.K = 1;
        cfg.L = 1;
        cfg.N_U = vec![1];
        cfg.N_H = vec![1];
        cfg.N_C = self.n_c;
        cfg.P_UE = self.p_ue;
        cfg.P_H_max = self.p_h_max;
        cfg.sigma2_CU = self.sigma2;
        cfg.weights = vec![1.0];
        cfg.min_rrh_rrh_m = 0.0;
        cfg.seed = 0;
        cfg.validate()?;

        let topology = Topology {
            cu_xy: (0.0, 0.0),
            rrh_xy: vec![(50.0, 0.0)],
            ue_xy: vec![(100.0, 0.0)],
            theta: vec![0.0],
            beta_fronthaul: vec![self.beta_fronthaul],
            beta_access: DMatrix::from_element(1, 1, self.h.norm_sqr()),
        };
        let h = vec![vec![CMat::from_element(1, 1, self.h)]];
        Ok((cfg.clone(), ChannelRealization::from_parts(topology, h, &cfg)))
    }
}

/// Deterministic family of well-conditioned scalar instances: fronthaul
/// SINRs between 1e2 and 1e6, access gains between 1 and 1e4, assorted
/// array sizes. Gains this size keep every optimal rate well above one bit,
/// which the relative cross-check tolerances rely on.
pub fn scalar_instance_family(count: usize, seed: u64) -> Vec<ScalarInstance> {
    (0..count as u64)
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let g: f64 = 10.0f64.powf(rng.gen_range(0.0..4.0));
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let n_c = *[4usize, 8, 16, 32, 64].get(rng.gen_range(0..5)).unwrap();
            let sinr: f64 = 10.0f64.powf(rng.gen_range(2.0..6.0));
            let sigma2 = 1.0;
            let p_h_max = 1.0;
            ScalarInstance {
                h: Complex64::from_polar(g.sqrt(), phase),
                beta_fronthaul: sinr * sigma2 / (n_c as f64 * p_h_max),
                n_c,
                sigma2,
                p_ue: 1.0,
                p_h_max,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub vars: DesignVariables,
    pub objective: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Exhaustive search over diagonal F and Omega and per-RRH powers.
///
/// Transmit entries sweep [0, budget] linearly (endpoints included, so
/// full-power optima are on-grid); quantization entries sweep a log band
/// around the isotropic level the initializer bisects to. Cells are visited
/// lexicographically and ties keep the first cell. An instance with no
/// feasible cell comes back as all zeros with objective 0.
pub fn grid_search_small(
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
    grid_density: usize,
) -> Result<GridSolution> {
    let k_count = channels.n_ue();
    let l_count = channels.n_rrh();
    let dim = cfg.N_U.iter().sum::<usize>() + cfg.N_H.iter().sum::<usize>() + l_count;
    if dim > GRID_DIM_LIMIT {
        return Err(CranError::GridTooLarge { dim, limit: GRID_DIM_LIMIT });
    }
    if grid_density < 2 {
        return Err(CranError::InvalidConfig(format!(
            "grid density must be at least 2, got {grid_density}"
        )));
    }

    let kappa = match initialize(channels, combiner, cfg) {
        Ok(init) => (0..l_count).map(|l| init.omega[l][(0, 0)].re).collect::<Vec<_>>(),
        Err(CranError::Infeasible(_)) => {
            return Ok(GridSolution { vars: DesignVariables::zeros(cfg), objective: 0.0 });
        }
        Err(e) => return Err(e),
    };

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for k in 0..k_count {
        for _ in 0..cfg.N_U[k] {
            axes.push(linspace(0.0, cfg.P_UE, grid_density));
        }
    }
    for l in 0..l_count {
        for _ in 0..cfg.N_H[l] {
            axes.push(logspace(kappa[l] / 2.0, 2.0 * kappa[l], grid_density));
        }
    }
    for _ in 0..l_count {
        axes.push(linspace(0.0, cfg.P_H_max, grid_density));
    }

    let scalar_shape = k_count == 1 && l_count == 1 && cfg.N_U[0] == 1 && cfg.N_H[0] == 1;
    if scalar_shape {
        grid_scalar_fast(&axes, channels, combiner, cfg)
    } else {
        grid_generic(&axes, channels, combiner, cfg)
    }
}

/// Pure-f64 sweep for the 1x1x1 shape; algebraically the same cell value and
/// feasibility rule as the generic path.
fn grid_scalar_fast(
    axes: &[Vec<f64>],
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<GridSolution> {
    let g = channels.h[0][0][(0, 0)].norm_sqr();
    let c = combiner.cross_gains[(0, 0)];
    let s = combiner.self_norms[0];
    let sigma2 = cfg.sigma2_CU;
    let w = cfg.effective_weights()[0];

    let mut best: Option<((f64, f64, f64), f64)> = None;
    for &fv in &axes[0] {
        for &wv in &axes[1] {
            for &pv in &axes[2] {
                let alpha = (1.0 + c * pv / (sigma2 * s)).log2();
                let gamma = ((1.0 + g * fv + wv) / wv).log2();
                if alpha - gamma < -1e-12 {
                    continue;
                }
                let rate = w * (1.0 + g * fv / (1.0 + wv)).log2();
                if best.as_ref().map_or(true, |(_, b)| rate > *b) {
                    best = Some(((fv, wv, pv), rate));
                }
            }
        }
    }
    Ok(match best {
        Some(((fv, wv, pv), rate)) => GridSolution {
            vars: DesignVariables {
                f: vec![CMat::from_element(1, 1, Complex64::new(fv, 0.0))],
                omega: vec![CMat::from_element(1, 1, Complex64::new(wv, 0.0))],
                p: vec![pv],
            },
            objective: rate,
        },
        None => GridSolution { vars: DesignVariables::zeros(cfg), objective: 0.0 },
    })
}

fn grid_generic(
    axes: &[Vec<f64>],
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<GridSolution> {
    let weights = cfg.effective_weights();
    let dim = axes.len();
    let mut idx = vec![0usize; dim];
    let mut best: Option<(DesignVariables, f64)> = None;

    'cells: loop {
        let point: Vec<f64> = idx.iter().zip(axes).map(|(&i, axis)| axis[i]).collect();
        let vars = vars_from_point(&point, cfg);
        let report = check_feasibility(&vars, channels, combiner, cfg);
        if report.worst_violation >= -1e-12 {
            if let Ok(rate) = weighted_sum_rate(&vars, channels, &weights, &cfg.solver) {
                if best.as_ref().map_or(true, |(_, b)| rate > *b) {
                    best = Some((vars, rate));
                }
            }
        }
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                continue 'cells;
            }
            idx[d] = 0;
        }
        break;
    }

    Ok(match best {
        Some((vars, objective)) => GridSolution { vars, objective },
        None => GridSolution { vars: DesignVariables::zeros(cfg), objective: 0.0 },
    })
}

fn vars_from_point(point: &[f64], cfg: &SystemConfig) -> DesignVariables {
    let mut cursor = 0;
    let mut take = |n: usize| {
        let slice = &point[cursor..cursor + n];
        cursor += n;
        slice.to_vec()
    };
    let f = cfg
        .N_U
        .iter()
        .map(|&n| CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            take(n).into_iter().map(|v| Complex64::new(v, 0.0)),
        )))
        .collect();
    let omega = cfg
        .N_H
        .iter()
        .map(|&m| CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            take(m).into_iter().map(|v| Complex64::new(v, 0.0)),
        )))
        .collect();
    let p = take(cfg.L);
    DesignVariables { f, omega, p }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combining::{build_combiner, Scheme};
    use approx::assert_relative_eq;

    fn reference_instance() -> ScalarInstance {
        // beta N_C p / sigma2 = 3 so alpha = 2 bits exactly.
        ScalarInstance {
            h: Complex64::new(1.0, 0.0),
            beta_fronthaul: 3.0 / 8.0,
            n_c: 8,
            sigma2: 1.0,
            p_ue: 1.0,
            p_h_max: 1.0,
        }
    }

    #[test]
    fn closed_form_reference_point() {
        let sol = scalar_closed_form(&reference_instance());
        assert_relative_eq!(sol.alpha, 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.omega, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.rate, 1.6f64.log2(), max_relative = 1e-12);
        assert_relative_eq!(sol.f, 1.0);
        assert_relative_eq!(sol.p, 1.0);
    }

    #[test]
    fn closed_form_dead_fronthaul() {
        let mut inst = reference_instance();
        inst.beta_fronthaul = 0.0;
        let sol = scalar_closed_form(&inst);
        assert_eq!(sol.rate, 0.0);
        assert_eq!(sol.alpha, 0.0);
        assert!(sol.omega.is_infinite());
    }

    #[test]
    fn instance_family_is_deterministic_and_in_band() {
        let a = scalar_instance_family(8, 42);
        let b = scalar_instance_family(8, 42);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.h, y.h);
            assert_eq!(x.beta_fronthaul, y.beta_fronthaul);
        }
        for inst in &a {
            let sol = scalar_closed_form(inst);
            assert!(sol.rate > 1.0, "rate {} too small for relative checks", sol.rate);
        }
        assert_ne!(a[0].h, a[1].h);
    }

    #[test]
    fn grid_tracks_closed_form_on_scalar_instances() {
        for inst in scalar_instance_family(4, 7) {
            let (cfg, channels) = inst.to_system().unwrap();
            let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
            let sol = scalar_closed_form(&inst);
            let grid = grid_search_small(&channels, &combiner, &cfg, 120).unwrap();
            // The grid never beats the true optimum and sits within one
            // quantization step of it.
            assert!(grid.objective <= sol.rate * (1.0 + 1e-9));
            assert_relative_eq!(grid.objective, sol.rate, max_relative = 0.01);
        }
    }

    #[test]
    fn fast_path_agrees_with_generic_sweep() {
        let inst = reference_instance();
        let (cfg, channels) = inst.to_system().unwrap();
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
        let kappa = initialize(&channels, &combiner, &cfg).unwrap().omega[0][(0, 0)].re;
        let axes = vec![
            linspace(0.0, cfg.P_UE, 9),
            logspace(kappa / 2.0, 2.0 * kappa, 9),
            linspace(0.0, cfg.P_H_max, 9),
        ];
        let fast = grid_scalar_fast(&axes, &channels, &combiner, &cfg).unwrap();
        let generic = grid_generic(&axes, &channels, &combiner, &cfg).unwrap();
        assert_relative_eq!(fast.objective, generic.objective, max_relative = 1e-9);
        assert_relative_eq!(fast.vars.p[0], generic.vars.p[0], max_relative = 1e-12);
        assert_relative_eq!(
            fast.vars.omega[0][(0, 0)].re,
            generic.vars.omega[0][(0, 0)].re,
            max_relative = 1e-12
        );
    }

    #[test]
    fn grid_rejects_large_instances() {
        let cfg = SystemConfig::desk_default();
        let channels = ChannelRealization::sample(&cfg, 1, 0).unwrap();
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
        assert!(matches!(
            grid_search_small(&channels, &combiner, &cfg, 5),
            Err(CranError::GridTooLarge { dim: 20, limit: 6 })
        ));
    }

    #[test]
    fn infeasible_instance_grids_to_zero() {
        let mut inst = reference_instance();
        inst.beta_fronthaul = 0.0;
        let (cfg, channels) = inst.to_system().unwrap();
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
        let grid = grid_search_small(&channels, &combiner, &cfg, 10).unwrap();
        assert_eq!(grid.objective, 0.0);
        assert_eq!(grid.vars.p[0], 0.0);
    }

    #[test]
    fn generic_grid_handles_two_rrhs() {
        let mut cfg = SystemConfig::desk_default();
        cfg.K = 1;
        cfg.L = 2;
        cfg.N_U = vec![1];
        cfg.N_H = vec![1, 1];
        cfg.N_C = 8;
        cfg.weights = vec![1.0];
        cfg.validate().unwrap();
        let channels = ChannelRealization::sample(&cfg, 21, 0).unwrap();
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Zf).unwrap();
        let grid = grid_search_small(&channels, &combiner, &cfg, 6).unwrap();
        assert!(grid.objective > 0.0);
        let report = check_feasibility(&grid.vars, &channels, &combiner, &cfg);
        assert!(report.worst_violation >= -1e-12);
    }
}

//! Convexified subproblem anchored at one feasible point.
//!
//! The weighted sum rate and the compression constraints are made concave by
//! replacing every convex log-det (or log) term with its tangent plane at the
//! anchor. Tangents over-estimate concave terms and the substitution happens
//! only where that direction tightens the problem, so the surrogate is an
//! inner approximation: its feasible set sits inside the true one and its
//! objective minorizes the true objective, with equality at the anchor.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::combining::CombinerSet;
use crate::config::SystemConfig;
use crate::error::{CranError, Result};
use crate::linalg::{
    block_diag, hermitize, identity, log2_det_pd, min_eigenvalue, pd_cholesky, pd_inverse,
    trace_re, CMat, LN_2,
};
use crate::rates::{cu_covariance, DesignVariables};
use crate::scenario::ChannelRealization;
use crate::solver::atoms::{
    AtomProblem, ConcaveAtom, ConcaveExpr, HermAffineMap, PsdBlock, ScalarAffineMap,
};
use crate::solver::barrier::{BarrierSolver, SubproblemSolver};
use crate::solver::layout::{accumulate_trace_grad, block_len, hermitian_basis, VariableLayout};

/// One inner-approximation subproblem. Any point that is feasible here is
/// feasible for the original constraints.
pub struct SurrogateProblem {
    pub layout: VariableLayout,
    pub problem: AtomProblem,
    /// Tangent minorant of each fronthaul capacity alpha_l, a function of p.
    pub alpha_hat: Vec<ConcaveExpr>,
    /// Negated tangent majorant of each compression rate gamma_l.
    pub minus_gamma_hat: Vec<ConcaveExpr>,
    pub anchor: DesignVariables,
    p_ue: f64,
    p_h_max: f64,
}

impl SurrogateProblem {
    pub fn objective_at(&self, vars: &DesignVariables) -> Option<f64> {
        self.problem.objective.eval(&self.layout.pack(vars))
    }

    pub fn alpha_hat_at(&self, l: usize, vars: &DesignVariables) -> Option<f64> {
        self.alpha_hat[l].eval(&self.layout.pack(vars))
    }

    pub fn gamma_hat_at(&self, l: usize, vars: &DesignVariables) -> Option<f64> {
        self.minus_gamma_hat[l].eval(&self.layout.pack(vars)).map(|v| -v)
    }

    /// Smallest surrogate compression slack alpha_hat_l - gamma_hat_l.
    pub fn constraint_margin_at(&self, vars: &DesignVariables) -> Option<f64> {
        let x = self.layout.pack(vars);
        let l_count = self.minus_gamma_hat.len();
        let mut worst = f64::INFINITY;
        for e in &self.problem.inequalities[..l_count] {
            worst = worst.min(e.eval(&x)?);
        }
        Some(worst)
    }
}

fn dense_to_terms(coeffs: &[f64]) -> Vec<(usize, f64)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| (i, c))
        .collect()
}

/// Builds the subproblem around `anchor`. The anchor's quantization blocks
/// must be strictly positive definite; everything else only needs the right
/// shapes.
pub fn assemble_surrogate(
    anchor: &DesignVariables,
    channels: &ChannelRealization,
    combiner: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<SurrogateProblem> {
    let k_count = channels.n_ue();
    let l_count = channels.n_rrh();
    if anchor.f.len() != k_count || anchor.omega.len() != l_count || anchor.p.len() != l_count {
        return Err(CranError::ShapeMismatch(format!(
            "anchor has {} F / {} Omega / {} p blocks for K={} L={}",
            anchor.f.len(),
            anchor.omega.len(),
            anchor.p.len(),
            k_count,
            l_count
        )));
    }
    let settings = &cfg.solver;
    let weights = cfg.effective_weights();

    let f0: Vec<CMat> = anchor.f.iter().map(hermitize).collect::<Result<_>>()?;
    let omega0: Vec<CMat> = anchor.omega.iter().map(hermitize).collect::<Result<_>>()?;
    for (k, fk) in f0.iter().enumerate() {
        if fk.nrows() != cfg.N_U[k] {
            return Err(CranError::ShapeMismatch(format!(
                "F_{k} is {}x{} but UE {k} has {} antennas",
                fk.nrows(),
                fk.ncols(),
                cfg.N_U[k]
            )));
        }
    }
    for (l, om) in omega0.iter().enumerate() {
        if om.nrows() != cfg.N_H[l] {
            return Err(CranError::ShapeMismatch(format!(
                "Omega_{l} is {}x{} but RRH {l} has {} antennas",
                om.nrows(),
                om.ncols(),
                cfg.N_H[l]
            )));
        }
        if pd_cholesky(om).is_none() {
            let eigs = om.symmetric_eigenvalues();
            let cond = eigs.max() / eigs.min().abs().max(f64::MIN_POSITIVE);
            return Err(CranError::SingularMatrix { context: "anchor quantization covariance", cond });
        }
    }
    for &pl in &anchor.p {
        if !(pl >= 0.0) {
            return Err(CranError::NegativePower(pl));
        }
    }

    let layout = VariableLayout::new(&cfg.N_U, &cfg.N_H);
    let n_vars = layout.n_vars;
    let n_total = cfg.total_rx_antennas();
    let stacked: Vec<CMat> = (0..k_count).map(|k| channels.stacked_channel(k)).collect();
    let omega_block0 = block_diag(&omega0);

    // Objective: sum_k w_k [log2 det S - xi(T_k)]. The S term is concave and
    // kept exact; each xi collapses into one affine atom.
    let w_sum: f64 = weights.iter().sum();
    let mut obj_coeffs = vec![0.0_f64; n_vars];
    let mut obj_const = 0.0_f64;
    for k in 0..k_count {
        let wk = weights[k];
        let t0 = cu_covariance(&f0, &omega_block0, channels, Some(k));
        let t0_log = log2_det_pd(&t0, settings.psd_floor)?;
        let t0i = pd_inverse(&t0, "interference covariance anchor")?;
        obj_const -= wk * (t0_log - n_total as f64 / LN_2 + trace_re(&t0i) / LN_2);
        for j in 0..k_count {
            if j == k {
                continue;
            }
            let m = stacked[j].adjoint() * &t0i * &stacked[j];
            let off = layout.f_offsets[j];
            accumulate_trace_grad(&m, -wk / LN_2, &mut obj_coeffs[off..off + block_len(cfg.N_U[j])]);
        }
        let mut row = 0;
        for l in 0..l_count {
            let m_l = cfg.N_H[l];
            let sub = t0i.view((row, row), (m_l, m_l)).into_owned();
            let off = layout.omega_offsets[l];
            accumulate_trace_grad(&sub, -wk / LN_2, &mut obj_coeffs[off..off + block_len(m_l)]);
            row += m_l;
        }
    }

    let mut s_terms: Vec<(usize, CMat)> = Vec::new();
    for k in 0..k_count {
        for (q, e) in hermitian_basis(cfg.N_U[k]).iter().enumerate() {
            s_terms.push((layout.f_offsets[k] + q, &stacked[k] * e * stacked[k].adjoint()));
        }
    }
    let mut row = 0;
    for l in 0..l_count {
        let m_l = cfg.N_H[l];
        for (q, e) in hermitian_basis(m_l).iter().enumerate() {
            let mut c = CMat::zeros(n_total, n_total);
            c.view_mut((row, row), (m_l, m_l)).copy_from(e);
            s_terms.push((layout.omega_offsets[l] + q, c));
        }
        row += m_l;
    }
    let objective = ConcaveExpr {
        atoms: vec![
            ConcaveAtom::LogDet {
                coeff: w_sum,
                map: HermAffineMap { dim: n_total, constant: identity(n_total), terms: s_terms },
            },
            ConcaveAtom::Affine {
                map: ScalarAffineMap { constant: obj_const, terms: dense_to_terms(&obj_coeffs) },
            },
        ],
    };

    // Compression constraints alpha_hat_l - gamma_hat_l >= 0.
    let sigma2 = cfg.sigma2_CU;
    let mut alpha_hat = Vec::with_capacity(l_count);
    let mut minus_gamma_hat = Vec::with_capacity(l_count);
    let mut inequalities = Vec::with_capacity(3 * l_count + k_count);
    for l in 0..l_count {
        let m_l = cfg.N_H[l];
        let mut z0 = identity(m_l) + &omega0[l];
        for k in 0..k_count {
            let hlk = &channels.h[l][k];
            z0 += hlk * &f0[k] * hlk.adjoint();
        }
        let z0_log = log2_det_pd(&z0, settings.psd_floor)?;
        let z0i = pd_inverse(&z0, "forwarded covariance anchor")?;

        let mut g_coeffs = vec![0.0_f64; n_vars];
        let g_const = -(z0_log - m_l as f64 / LN_2 + trace_re(&z0i) / LN_2);
        for k in 0..k_count {
            let m = channels.h[l][k].adjoint() * &z0i * &channels.h[l][k];
            let off = layout.f_offsets[k];
            accumulate_trace_grad(&m, -1.0 / LN_2, &mut g_coeffs[off..off + block_len(cfg.N_U[k])]);
        }
        let off = layout.omega_offsets[l];
        accumulate_trace_grad(&z0i, -1.0 / LN_2, &mut g_coeffs[off..off + block_len(m_l)]);
        let mg = ConcaveExpr {
            atoms: vec![
                ConcaveAtom::LogDet {
                    coeff: 1.0,
                    map: HermAffineMap::block_embedding(layout.omega_offsets[l], m_l, 0.0),
                },
                ConcaveAtom::Affine {
                    map: ScalarAffineMap { constant: g_const, terms: dense_to_terms(&g_coeffs) },
                },
            ],
        };

        let s_l = combiner.self_norms[l];
        let mut y0 = sigma2 * s_l;
        for j in 0..l_count {
            if j != l {
                y0 += combiner.cross_gains[(l, j)] * anchor.p[j];
            }
        }
        let mut tot_terms = Vec::with_capacity(l_count);
        let mut a_terms = Vec::new();
        for j in 0..l_count {
            let c = combiner.cross_gains[(l, j)];
            if c != 0.0 {
                tot_terms.push((layout.p_index(j), c));
                if j != l {
                    a_terms.push((layout.p_index(j), -c / (y0 * LN_2)));
                }
            }
        }
        let a_const = -y0.log2() + 1.0 / LN_2 - sigma2 * s_l / (y0 * LN_2);
        let ah = ConcaveExpr {
            atoms: vec![
                ConcaveAtom::Log {
                    coeff: 1.0,
                    map: ScalarAffineMap { constant: sigma2 * s_l, terms: tot_terms },
                },
                ConcaveAtom::Affine { map: ScalarAffineMap { constant: a_const, terms: a_terms } },
            ],
        };

        let mut h_atoms = ah.atoms.clone();
        h_atoms.extend(mg.atoms.iter().cloned());
        inequalities.push(ConcaveExpr { atoms: h_atoms });
        alpha_hat.push(ah);
        minus_gamma_hat.push(mg);
    }

    for k in 0..k_count {
        let off = layout.f_offsets[k];
        let terms = (0..cfg.N_U[k]).map(|i| (off + i, -1.0)).collect();
        inequalities.push(ConcaveExpr::affine(ScalarAffineMap { constant: cfg.P_UE, terms }));
    }
    for l in 0..l_count {
        inequalities.push(ConcaveExpr::affine(ScalarAffineMap {
            constant: cfg.P_H_max,
            terms: vec![(layout.p_index(l), -1.0)],
        }));
    }
    for l in 0..l_count {
        inequalities.push(ConcaveExpr::affine(ScalarAffineMap {
            constant: 0.0,
            terms: vec![(layout.p_index(l), 1.0)],
        }));
    }

    let mut psd_blocks = Vec::with_capacity(k_count + l_count);
    for k in 0..k_count {
        psd_blocks.push(PsdBlock { offset: layout.f_offsets[k], dim: cfg.N_U[k], floor: 0.0 });
    }
    for l in 0..l_count {
        let m_l = cfg.N_H[l];
        // Relative floor: the barrier keeps Omega_l invertible without
        // pinning it to an absolute scale the instance may not have.
        let floor = settings.psd_floor * trace_re(&omega0[l]) / m_l as f64;
        psd_blocks.push(PsdBlock { offset: layout.omega_offsets[l], dim: m_l, floor });
    }

    let problem = AtomProblem::new(n_vars, objective, inequalities, psd_blocks);

    Ok(SurrogateProblem {
        layout,
        problem,
        alpha_hat,
        minus_gamma_hat,
        anchor: DesignVariables { f: f0, omega: omega0, p: anchor.p.clone() },
        p_ue: cfg.P_UE,
        p_h_max: cfg.P_H_max,
    })
}

/// Moves the anchor strictly inside every constraint so the barrier can
/// start. Powers come off their box edges, covariance blocks off their PSD
/// floors, and the quantization blocks are inflated until every compression
/// slack is positive (near the anchor, inflating Omega always loosens it).
pub fn interior_start(sp: &SurrogateProblem) -> Result<DVector<f64>> {
    const EDGE: f64 = 1e-7;
    let mut vars = sp.anchor.clone();
    let l_count = vars.omega.len();

    let lo = EDGE * sp.p_h_max;
    let hi = (1.0 - EDGE) * sp.p_h_max;
    for pl in &mut vars.p {
        *pl = pl.clamp(lo, hi);
    }

    for fk in &mut vars.f {
        let dim = fk.nrows();
        let eig_floor = EDGE * sp.p_ue / dim as f64;
        let min = min_eigenvalue(fk);
        if min < eig_floor {
            for i in 0..dim {
                fk[(i, i)] += Complex64::new(eig_floor - min, 0.0);
            }
        }
        let tr = trace_re(fk);
        let cap = (1.0 - EDGE) * sp.p_ue;
        if tr > cap {
            *fk *= Complex64::new(cap / tr, 0.0);
        }
    }

    for (l, om) in vars.omega.iter_mut().enumerate() {
        let off = sp.layout.omega_offsets[l];
        let floor = sp
            .problem
            .psd_blocks
            .iter()
            .find(|b| b.offset == off)
            .map_or(0.0, |b| b.floor);
        let min = min_eigenvalue(om);
        let target = 2.0 * floor.max(f64::MIN_POSITIVE);
        if min < target {
            for i in 0..om.nrows() {
                om[(i, i)] += Complex64::new(target - min, 0.0);
            }
        }
    }

    let mut x = sp.layout.pack(&vars);
    for _ in 0..200 {
        let mut any_bad = false;
        for l in 0..l_count {
            let ok = matches!(sp.problem.inequalities[l].eval(&x), Some(v) if v > 0.0);
            if !ok {
                any_bad = true;
                vars.omega[l] *= Complex64::new(1.0 + 1e-3, 0.0);
            }
        }
        if !any_bad {
            break;
        }
        x = sp.layout.pack(&vars);
    }

    if !sp.problem.is_interior(&x) {
        return Err(CranError::Infeasible(
            "could not construct a strictly interior start from the anchor".into(),
        ));
    }
    Ok(x)
}

/// Maximizes the subproblem with the default barrier backend.
pub fn solve_surrogate(sp: &SurrogateProblem) -> Result<(DesignVariables, f64)> {
    solve_surrogate_with(&BarrierSolver::default(), sp)
}

pub fn solve_surrogate_with(
    backend: &dyn SubproblemSolver,
    sp: &SurrogateProblem,
) -> Result<(DesignVariables, f64)> {
    let x0 = interior_start(sp)?;
    let x = backend.maximize(&sp.problem, &x0)?;
    let obj = sp
        .problem
        .objective
        .eval(&x)
        .ok_or_else(|| CranError::SubproblemFailed("solution left the objective domain".into()))?;
    // The anchor is feasible for the surrogate, so the true optimum is at
    // least the anchor value; fall back if the backend lost that numerically.
    if let Some(a) = sp.objective_at(&sp.anchor) {
        if obj < a {
            return Ok((sp.anchor.clone(), a));
        }
    }
    Ok((sp.layout.unpack(&x), obj))
}

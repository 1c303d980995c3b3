//! Log-barrier path-following backend for the atom subproblems.
//!
//! Damped Newton on
//!   Phi_t(x) = -t (obj(x) - obj_ref) - sum_i ln e_i(x) - sum_b ln det(X_b - floor I)
//! for a geometrically increasing t until the barrier duality gap
//! (barrier parameter / t) is below tolerance. The objective is re-anchored
//! at each outer round so Phi stays O(1) and line-search comparisons keep
//! full precision at large t.

use nalgebra::{DMatrix, DVector};

use crate::error::{CranError, Result};
use crate::solver::atoms::AtomProblem;

pub trait SubproblemSolver {
    /// Maximizes the problem from a strictly interior start. The returned
    /// point is strictly interior and within the solver's gap tolerance of
    /// the optimum.
    fn maximize(&self, prob: &AtomProblem, x0: &DVector<f64>) -> Result<DVector<f64>>;
}

#[derive(Debug, Clone)]
pub struct BarrierSolver {
    pub t0: f64,
    pub mu: f64,
    /// Target on (barrier parameter)/t relative to the objective scale.
    pub gap_tol: f64,
    /// Newton decrement threshold lambda^2 / 2.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
}

impl Default for BarrierSolver {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 20.0,
            gap_tol: 1e-9,
            newton_tol: 1e-10,
            max_newton: 80,
            max_outer: 60,
            armijo_c: 0.01,
            backtrack: 0.5,
        }
    }
}

struct BarrierEval {
    phi: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl BarrierSolver {
    fn phi(&self, prob: &AtomProblem, x: &DVector<f64>, t: f64, obj_ref: f64) -> Option<f64> {
        let obj = prob.objective.eval(x)?;
        let mut total = -t * (obj - obj_ref);
        for e in &prob.inequalities {
            let v = e.eval(x)?;
            if v <= 0.0 {
                return None;
            }
            total -= v.ln();
        }
        for map in &prob.psd_maps {
            total -= map.lndet(x)?;
        }
        Some(total)
    }

    fn derivs(&self, prob: &AtomProblem, x: &DVector<f64>, t: f64, obj_ref: f64) -> Option<BarrierEval> {
        let n = prob.n_vars;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);

        let obj = prob.objective.accumulate(x, -t, &mut grad, Some(&mut hess))?;
        let mut phi = -t * (obj - obj_ref);

        let mut ge = DVector::zeros(n);
        let mut he = DMatrix::zeros(n, n);
        for e in &prob.inequalities {
            ge.fill(0.0);
            he.fill(0.0);
            let v = e.accumulate(x, 1.0, &mut ge, Some(&mut he))?;
            if v <= 0.0 {
                return None;
            }
            phi -= v.ln();
            grad.axpy(-1.0 / v, &ge, 1.0);
            // hess += ge ge' / v^2 - he / v
            hess.ger(1.0 / (v * v), &ge, &ge, 1.0);
            hess += he.scale(-1.0 / v);
        }
        for map in &prob.psd_maps {
            let v = map.lndet_accumulate(x, -1.0, &mut grad, -1.0, Some(&mut hess))?;
            phi -= v;
        }
        Some(BarrierEval { phi, grad, hess })
    }

    /// Newton direction with escalating ridge regularization.
    fn newton_step(&self, hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
        let n = hess.nrows();
        let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
        let mut ridge = 0.0;
        for _ in 0..16 {
            let mut h = hess.clone();
            if ridge > 0.0 {
                for i in 0..n {
                    h[(i, i)] += ridge;
                }
            }
            if let Some(chol) = h.cholesky() {
                return Ok(chol.solve(&(-grad)));
            }
            ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
        }
        Err(CranError::SubproblemFailed("newton system not positive definite".into()))
    }

    fn center(
        &self,
        prob: &AtomProblem,
        mut x: DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        let obj_ref = prob
            .objective
            .eval(&x)
            .ok_or_else(|| CranError::SubproblemFailed("center started outside domain".into()))?;
        for _ in 0..self.max_newton {
            let ev = self
                .derivs(prob, &x, t, obj_ref)
                .ok_or_else(|| CranError::SubproblemFailed("iterate left the domain".into()))?;
            let dir = self.newton_step(&ev.hess, &ev.grad)?;
            let lambda_sq = -ev.grad.dot(&dir);
            if !lambda_sq.is_finite() {
                return Err(CranError::SubproblemFailed("non-finite newton decrement".into()));
            }
            // At convergence (or below float resolution of phi) stop.
            if lambda_sq / 2.0 <= self.newton_tol.max(ev.phi.abs() * 1e-14) {
                break;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &x + dir.scale(step);
                if let Some(phi_c) = self.phi(prob, &cand, t, obj_ref) {
                    if phi_c <= ev.phi - self.armijo_c * step * lambda_sq {
                        x = cand;
                        accepted = true;
                        break;
                    }
                }
                step *= self.backtrack;
            }
            if !accepted {
                // Progress is below measurable resolution; current x is the
                // best centered point available at this t.
                break;
            }
        }
        Ok(x)
    }
}

impl SubproblemSolver for BarrierSolver {
    fn maximize(&self, prob: &AtomProblem, x0: &DVector<f64>) -> Result<DVector<f64>> {
        if !prob.is_interior(x0) {
            return Err(CranError::SubproblemFailed("start point is not strictly interior".into()));
        }
        let nu = prob.barrier_parameter();
        let obj0 = prob.objective.eval(x0).unwrap_or(0.0);
        let gap_target = self.gap_tol * obj0.abs().max(1.0);

        let mut x = x0.clone();
        let mut t = self.t0;
        for _ in 0..self.max_outer {
            x = self.center(prob, x, t)?;
            if nu / t <= gap_target {
                return Ok(x);
            }
            t *= self.mu;
        }
        Err(CranError::SubproblemFailed(format!(
            "barrier did not reach gap {gap_target:.3e} within {} rounds",
            self.max_outer
        )))
    }
}

//! Atom-level description of the convex subproblem.
//!
//! The backend contract: maximize a concave expression subject to concave
//! expressions being nonnegative and Hermitian blocks of the variable vector
//! staying positive definite above a floor. Expressions are sums of three
//! atom kinds (log-det, log, affine), each of which knows its own value and
//! derivatives, so any smooth solver can drive them.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{pd_cholesky, CMat, LN_2};
use crate::solver::layout::hermitian_basis;

/// Hermitian-matrix-valued affine function of the packed variables:
/// X(x) = constant + sum_q x[idx_q] * C_q.
#[derive(Debug, Clone)]
pub struct HermAffineMap {
    pub dim: usize,
    pub constant: CMat,
    pub terms: Vec<(usize, CMat)>,
}

impl HermAffineMap {
    /// Identity embedding of one packed Hermitian block, optionally shifted:
    /// X(x) = block - shift * I.
    pub fn block_embedding(offset: usize, dim: usize, shift: f64) -> Self {
        let terms = hermitian_basis(dim)
            .into_iter()
            .enumerate()
            .map(|(q, e)| (offset + q, e))
            .collect();
        let constant = CMat::identity(dim, dim).scale(-shift);
        Self { dim, constant, terms }
    }

    pub fn eval(&self, x: &DVector<f64>) -> CMat {
        let mut out = self.constant.clone();
        for (idx, c) in &self.terms {
            out += c.scale(x[*idx]);
        }
        out
    }

    /// ln det X(x), or None when X(x) is not positive definite.
    pub fn lndet(&self, x: &DVector<f64>) -> Option<f64> {
        let chol = pd_cholesky(&self.eval(x))?;
        let l = chol.l_dirty();
        Some(2.0 * (0..self.dim).map(|i| l[(i, i)].re.ln()).sum::<f64>())
    }

    /// ln det X(x) with derivative accumulation:
    /// grad += g_scale * d(lndet)/dx, hess += h_scale * d2(lndet)/dx2.
    ///
    /// The Hessian term is negative semidefinite; callers choose signs via
    /// the scales.
    pub fn lndet_accumulate(
        &self,
        x: &DVector<f64>,
        g_scale: f64,
        grad: &mut DVector<f64>,
        h_scale: f64,
        mut hess: Option<&mut DMatrix<f64>>,
    ) -> Option<f64> {
        let m = self.eval(x);
        let chol = pd_cholesky(&m)?;
        let l = chol.l();
        let value = 2.0 * (0..self.dim).map(|i| l[(i, i)].re.ln()).sum::<f64>();

        // A_q = L^{-1} C_q L^{-H} is the coefficient matrix in the whitened
        // coordinates: grad_q = Re tr(A_q), hess_{qr} = -Re tr(A_q A_r).
        let mut whitened: Vec<(usize, CMat)> = Vec::with_capacity(self.terms.len());
        for (idx, c) in &self.terms {
            let y = l.solve_lower_triangular(c)?;
            let z = l.solve_lower_triangular(&y.adjoint())?;
            whitened.push((*idx, z.adjoint()));
        }

        for (idx, a) in &whitened {
            let tr: f64 = (0..self.dim).map(|i| a[(i, i)].re).sum();
            grad[*idx] += g_scale * tr;
        }
        if let Some(h) = hess.as_deref_mut() {
            for (i, (qi, ai)) in whitened.iter().enumerate() {
                for (qj, aj) in whitened.iter().skip(i) {
                    let mut t = 0.0;
                    for r in 0..self.dim {
                        for s in 0..self.dim {
                            t += (ai[(r, s)] * aj[(s, r)]).re;
                        }
                    }
                    let v = -h_scale * t;
                    h[(*qi, *qj)] += v;
                    if qi != qj {
                        h[(*qj, *qi)] += v;
                    }
                }
            }
        }
        Some(value)
    }

}

/// Scalar affine function a' x + b.
#[derive(Debug, Clone, Default)]
pub struct ScalarAffineMap {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl ScalarAffineMap {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

/// Concave building blocks, all in bits (base-2 logs).
#[derive(Debug, Clone)]
pub enum ConcaveAtom {
    /// coeff * log2 det X(x), coeff > 0.
    LogDet { coeff: f64, map: HermAffineMap },
    /// coeff * log2(a' x + b), coeff > 0.
    Log { coeff: f64, map: ScalarAffineMap },
    /// a' x + b.
    Affine { map: ScalarAffineMap },
}

/// Sum of concave atoms.
#[derive(Debug, Clone, Default)]
pub struct ConcaveExpr {
    pub atoms: Vec<ConcaveAtom>,
}

impl ConcaveExpr {
    pub fn affine(map: ScalarAffineMap) -> Self {
        Self { atoms: vec![ConcaveAtom::Affine { map }] }
    }

    /// Value at x, or None outside the domain (nonpositive log arguments,
    /// non-PD log-det arguments).
    pub fn eval(&self, x: &DVector<f64>) -> Option<f64> {
        let mut total = 0.0;
        for atom in &self.atoms {
            total += match atom {
                ConcaveAtom::LogDet { coeff, map } => coeff * map.lndet(x)? / LN_2,
                ConcaveAtom::Log { coeff, map } => {
                    let s = map.eval(x);
                    if s <= 0.0 {
                        return None;
                    }
                    coeff * s.ln() / LN_2
                }
                ConcaveAtom::Affine { map } => map.eval(x),
            };
        }
        Some(total)
    }

    /// Value at x; adds `scale` times the gradient (and Hessian, if given).
    pub fn accumulate(
        &self,
        x: &DVector<f64>,
        scale: f64,
        grad: &mut DVector<f64>,
        mut hess: Option<&mut DMatrix<f64>>,
    ) -> Option<f64> {
        let mut total = 0.0;
        for atom in &self.atoms {
            match atom {
                ConcaveAtom::LogDet { coeff, map } => {
                    let s = scale * coeff / LN_2;
                    let v = map.lndet_accumulate(x, s, grad, s, hess.as_deref_mut())?;
                    total += coeff * v / LN_2;
                }
                ConcaveAtom::Log { coeff, map } => {
                    let s = map.eval(x);
                    if s <= 0.0 {
                        return None;
                    }
                    total += coeff * s.ln() / LN_2;
                    let g = scale * coeff / (LN_2 * s);
                    for &(i, a) in &map.terms {
                        grad[i] += g * a;
                    }
                    if let Some(h) = hess.as_deref_mut() {
                        let hs = scale * coeff / (LN_2 * s * s);
                        for &(i, a) in &map.terms {
                            for &(j, b) in &map.terms {
                                h[(i, j)] -= hs * a * b;
                            }
                        }
                    }
                }
                ConcaveAtom::Affine { map } => {
                    total += map.eval(x);
                    for &(i, a) in &map.terms {
                        grad[i] += scale * a;
                    }
                }
            }
        }
        Some(total)
    }
}

/// One Hermitian block constrained to X >= floor * I.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub offset: usize,
    pub dim: usize,
    pub floor: f64,
}

/// Full subproblem: maximize `objective` over
/// { x : inequalities[i](x) >= 0, psd blocks above their floors }.
#[derive(Debug, Clone)]
pub struct AtomProblem {
    pub n_vars: usize,
    pub objective: ConcaveExpr,
    pub inequalities: Vec<ConcaveExpr>,
    pub psd_blocks: Vec<PsdBlock>,
    /// Shifted block embeddings backing the PSD barriers.
    pub psd_maps: Vec<HermAffineMap>,
}

impl AtomProblem {
    pub fn new(
        n_vars: usize,
        objective: ConcaveExpr,
        inequalities: Vec<ConcaveExpr>,
        psd_blocks: Vec<PsdBlock>,
    ) -> Self {
        let psd_maps = psd_blocks
            .iter()
            .map(|b| HermAffineMap::block_embedding(b.offset, b.dim, b.floor))
            .collect();
        Self { n_vars, objective, inequalities, psd_blocks, psd_maps }
    }

    /// Total barrier parameter: one per scalar inequality plus the block
    /// orders of the PSD cones.
    pub fn barrier_parameter(&self) -> f64 {
        (self.inequalities.len() + self.psd_blocks.iter().map(|b| b.dim).sum::<usize>()) as f64
    }

    /// Strict interiority (and objective-domain membership) test.
    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        self.objective.eval(x).is_some()
            && self.inequalities.iter().all(|e| e.eval(x).map_or(false, |v| v > 0.0))
            && self.psd_maps.iter().all(|m| m.lndet(x).is_some())
    }
}

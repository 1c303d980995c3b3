//! Small dense complex-matrix helpers used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CranError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const LN_2: f64 = std::f64::consts::LN_2;

/// Relative Frobenius residual above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_RESIDUAL_TOL: f64 = 1e-8;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Cholesky factorization that actually rejects non-PD input.
///
/// nalgebra's complex Cholesky takes the complex square root of a negative
/// pivot instead of failing, so indefinite Hermitian matrices "factor"
/// silently. The first bad pivot always surfaces on the diagonal of L as a
/// value that is not positive real, which is what this checks.
pub fn pd_cholesky(h: &CMat) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = h.clone().cholesky()?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-8 * d.re {
            return None;
        }
    }
    Some(chol)
}

/// Symmetrizes `x`, rejecting inputs whose Hermitian residual is too large to
/// be a rounding artifact.
pub fn hermitize(x: &CMat) -> Result<CMat> {
    if x.nrows() != x.ncols() {
        return Err(CranError::ShapeMismatch(format!(
            "expected square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let adj = x.adjoint();
    let residual = (x - &adj).norm() / x.norm().max(1.0);
    if residual > HERMITIAN_RESIDUAL_TOL {
        return Err(CranError::NotHermitian(residual));
    }
    Ok((x + adj).scale(0.5))
}

/// log2 det of a Hermitian positive definite matrix.
///
/// Cholesky first; on failure falls back to an eigendecomposition where
/// eigenvalues within `psd_floor` of zero (relative to the mean eigenvalue)
/// are clamped, and anything more negative is an error.
pub fn log2_det_pd(x: &CMat, psd_floor: f64) -> Result<f64> {
    let h = hermitize(x)?;
    if let Some(chol) = pd_cholesky(&h) {
        let l = chol.l_dirty();
        let mut acc = 0.0;
        for i in 0..l.nrows() {
            acc += l[(i, i)].re.ln();
        }
        return Ok(2.0 * acc / LN_2);
    }
    let n = h.nrows();
    let eigs = h.symmetric_eigenvalues();
    let scale = (eigs.iter().sum::<f64>() / n as f64).abs().max(f64::MIN_POSITIVE);
    let clamp = psd_floor * scale;
    let mut acc = 0.0;
    for &ev in eigs.iter() {
        if ev <= 0.0 {
            if ev < -clamp {
                return Err(CranError::NotPsd(ev));
            }
            acc += clamp.max(f64::MIN_POSITIVE).ln();
        } else {
            acc += ev.max(clamp.max(f64::MIN_POSITIVE)).ln();
        }
    }
    Ok(acc / LN_2)
}

/// Minimum eigenvalue of the Hermitian part of `x`. Never fails; intended for
/// feasibility reporting where a residual, not an error, is wanted.
pub fn min_eigenvalue(x: &CMat) -> f64 {
    let h = (x + x.adjoint()).scale(0.5);
    h.symmetric_eigenvalues().min()
}

/// Re tr(a b) for square matrices of equal size.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Stacks square blocks along the diagonal.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn pd_inverse(x: &CMat, context: &'static str) -> Result<CMat> {
    let h = hermitize(x)?;
    pd_cholesky(&h).map(|c| c.inverse()).ok_or_else(|| {
        let eigs = h.symmetric_eigenvalues();
        let cond = eigs.max() / eigs.min().abs().max(f64::MIN_POSITIVE);
        CranError::SingularMatrix { context, cond }
    })
}

/// Stacks the matrices vertically; all must share a column count.
pub fn vstack(parts: &[CMat]) -> CMat {
    let cols = parts[0].ncols();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut off = 0;
    for p in parts {
        debug_assert_eq!(p.ncols(), cols);
        out.view_mut((off, 0), (p.nrows(), cols)).copy_from(p);
        off += p.nrows();
    }
    out
}

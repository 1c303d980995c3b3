//! CU-side receive combining over the wireless fronthaul.
//!
//! Each RRH forwards its compressed observation on a single transmit chain;
//! the CU separates the L streams with per-RRH beamformers derived from the
//! steering matrix. Everything downstream only needs the resulting scalar
//! link gains, so they are precomputed here.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CranError, Result};
use crate::linalg::{pd_cholesky, CMat};

/// Condition-number ceiling beyond which the zero-forcing Gram matrix is
/// treated as singular.
const ZF_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MR")]
    Mr,
    #[serde(rename = "ZF")]
    Zf,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Mr => "MR",
            Scheme::Zf => "ZF",
        })
    }
}

impl FromStr for Scheme {
    type Err = CranError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(Scheme::Mr),
            "zf" => Ok(Scheme::Zf),
            other => Err(CranError::InvalidConfig(format!("unknown scheme '{other}' (use mr or zf)"))),
        }
    }
}

/// Combiners and the scalar gains they induce on the fronthaul links.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    pub scheme: Scheme,
    /// N_C x L; column l combines the stream of RRH l.
    pub u: CMat,
    /// cross_gains[(l, j)] = |u_l^H g_j|^2.
    pub cross_gains: DMatrix<f64>,
    /// self_norms[l] = ||u_l||^2.
    pub self_norms: DVector<f64>,
}

/// Builds the per-RRH combiners.
///
/// MR matches the steering columns (u_l = b_l). ZF inverts the steering Gram
/// matrix (U = B (B^H B)^{-1}) so that U^H B = I, nulling inter-RRH leakage.
pub fn build_combiner(b: &CMat, g: &CMat, scheme: Scheme) -> Result<CombinerSet> {
    if b.shape() != g.shape() {
        return Err(CranError::ShapeMismatch(format!(
            "steering is {:?} but fronthaul channel is {:?}",
            b.shape(),
            g.shape()
        )));
    }
    let u = match scheme {
        Scheme::Mr => b.clone(),
        Scheme::Zf => {
            let gram = b.adjoint() * b;
            let eigs = gram.symmetric_eigenvalues();
            let min = eigs.min();
            let cond = if min > 0.0 { eigs.max() / min } else { f64::INFINITY };
            if !(min > 0.0) || cond > ZF_COND_LIMIT {
                return Err(CranError::SingularMatrix { context: "zero-forcing combiner", cond });
            }
            let gram_inv = pd_cholesky(&gram)
                .ok_or(CranError::SingularMatrix { context: "zero-forcing combiner", cond })?
                .inverse();
            b * gram_inv
        }
    };

    let m = u.adjoint() * g;
    let l = b.ncols();
    let mut cross_gains = DMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            cross_gains[(i, j)] = m[(i, j)].norm_sqr();
        }
    }
    let self_norms = DVector::from_iterator(l, u.column_iter().map(|c| c.norm_squared()));

    Ok(CombinerSet { scheme, u, cross_gains, self_norms })
}

/// Post-combining SINR of each fronthaul stream under transmit powers `p`.
pub fn fronthaul_sinr(combiner: &CombinerSet, p: &[f64], sigma2: f64) -> Result<Vec<f64>> {
    let l_count = combiner.self_norms.len();
    if p.len() != l_count {
        return Err(CranError::ShapeMismatch(format!(
            "{} powers for {} streams",
            p.len(),
            l_count
        )));
    }
    if let Some(&bad) = p.iter().find(|&&v| !(v >= 0.0)) {
        return Err(CranError::NegativePower(bad));
    }
    if !(sigma2 > 0.0) {
        return Err(CranError::InvalidConfig(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok((0..l_count)
        .map(|l| {
            let signal = combiner.cross_gains[(l, l)] * p[l];
            let mut interference = 0.0;
            for j in 0..l_count {
                if j != l {
                    interference += combiner.cross_gains[(l, j)] * p[j];
                }
            }
            signal / (sigma2 * combiner.self_norms[l] + interference)
        })
        .collect())
}

/// Shannon capacity of each fronthaul stream, bits/channel use.
pub fn fronthaul_capacity(combiner: &CombinerSet, p: &[f64], sigma2: f64) -> Result<Vec<f64>> {
    Ok(fronthaul_sinr(combiner, p, sigma2)?
        .into_iter()
        .map(|s| (1.0 + s).log2())
        .collect())
}

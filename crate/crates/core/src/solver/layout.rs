//! Real-vector parameterization of the decision variables.
//!
//! A Hermitian n x n block occupies n^2 consecutive reals: the n diagonal
//! entries first, then (Re, Im) per strict-upper-triangle entry in row-major
//! order. The per-RRH powers follow all matrix blocks.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::CMat;
use crate::rates::DesignVariables;

pub fn block_len(n: usize) -> usize {
    n * n
}

pub fn pack_hermitian(x: &CMat, out: &mut [f64]) {
    let n = x.nrows();
    debug_assert_eq!(out.len(), block_len(n));
    for i in 0..n {
        out[i] = x[(i, i)].re;
    }
    let mut idx = n;
    for i in 0..n {
        for j in i + 1..n {
            out[idx] = x[(i, j)].re;
            out[idx + 1] = x[(i, j)].im;
            idx += 2;
        }
    }
}

pub fn unpack_hermitian(v: &[f64], n: usize) -> CMat {
    debug_assert_eq!(v.len(), block_len(n));
    let mut x = CMat::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = Complex64::new(v[i], 0.0);
    }
    let mut idx = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(v[idx], v[idx + 1]);
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
            idx += 2;
        }
    }
    x
}

/// Basis matrices E_q with X = sum_q v_q E_q for the packing above.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(block_len(n));
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        basis.push(e);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut re = CMat::zeros(n, n);
            re[(i, j)] = Complex64::new(1.0, 0.0);
            re[(j, i)] = Complex64::new(1.0, 0.0);
            basis.push(re);
            let mut im = CMat::zeros(n, n);
            im[(i, j)] = Complex64::new(0.0, 1.0);
            im[(j, i)] = Complex64::new(0.0, -1.0);
            basis.push(im);
        }
    }
    basis
}

/// Adds `scale * d tr(M X)/dv` to `out` for the block variables of X.
/// M need not be Hermitian; only tr(M E_q) enters.
pub fn accumulate_trace_grad(m: &CMat, scale: f64, out: &mut [f64]) {
    let n = m.nrows();
    debug_assert_eq!(out.len(), block_len(n));
    for i in 0..n {
        out[i] += scale * m[(i, i)].re;
    }
    let mut idx = n;
    for i in 0..n {
        for j in i + 1..n {
            out[idx] += scale * (m[(i, j)] + m[(j, i)]).re;
            out[idx + 1] += scale * (m[(i, j)] - m[(j, i)]).im;
            idx += 2;
        }
    }
}

/// Offsets of every variable group inside the packed vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLayout {
    pub f_dims: Vec<usize>,
    pub omega_dims: Vec<usize>,
    pub f_offsets: Vec<usize>,
    pub omega_offsets: Vec<usize>,
    pub p_offset: usize,
    pub n_vars: usize,
}

impl VariableLayout {
    pub fn new(n_u: &[usize], n_h: &[usize]) -> Self {
        let mut off = 0;
        let f_offsets: Vec<usize> = n_u
            .iter()
            .map(|&n| {
                let o = off;
                off += block_len(n);
                o
            })
            .collect();
        let omega_offsets: Vec<usize> = n_h
            .iter()
            .map(|&m| {
                let o = off;
                off += block_len(m);
                o
            })
            .collect();
        let p_offset = off;
        let n_vars = off + n_h.len();
        Self {
            f_dims: n_u.to_vec(),
            omega_dims: n_h.to_vec(),
            f_offsets,
            omega_offsets,
            p_offset,
            n_vars,
        }
    }

    pub fn p_index(&self, l: usize) -> usize {
        self.p_offset + l
    }

    pub fn pack(&self, vars: &DesignVariables) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_vars);
        for (k, f) in vars.f.iter().enumerate() {
            let n = self.f_dims[k];
            pack_hermitian(f, &mut x.as_mut_slice()[self.f_offsets[k]..self.f_offsets[k] + block_len(n)]);
        }
        for (l, w) in vars.omega.iter().enumerate() {
            let m = self.omega_dims[l];
            pack_hermitian(
                w,
                &mut x.as_mut_slice()[self.omega_offsets[l]..self.omega_offsets[l] + block_len(m)],
            );
        }
        for (l, &p) in vars.p.iter().enumerate() {
            x[self.p_index(l)] = p;
        }
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> DesignVariables {
        let f = self
            .f_dims
            .iter()
            .zip(&self.f_offsets)
            .map(|(&n, &o)| unpack_hermitian(&x.as_slice()[o..o + block_len(n)], n))
            .collect();
        let omega = self
            .omega_dims
            .iter()
            .zip(&self.omega_offsets)
            .map(|(&m, &o)| unpack_hermitian(&x.as_slice()[o..o + block_len(m)], m))
            .collect();
        let p = (0..self.omega_dims.len()).map(|l| x[self.p_index(l)]).collect();
        DesignVariables { f, omega, p }
    }
}

//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted non-increasing.
pub(crate) struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    if n == 0 {
        return Ok(HermitianEigen { values: Vec::new(), vectors: CMatrix::zeros(0, 0) });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    // symmetrize exactly so the solver sees a Hermitian input
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Largest absolute eigenvalue, i.e. the spectral norm of a Hermitian matrix.
pub(crate) fn hermitian_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of an arbitrary matrix via its singular values.
pub(crate) fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |acc, s| acc.max(*s))
}

/// `V diag(d) V^H` restricted to the first `cols` columns of `V`.
pub(crate) fn reassemble(vectors: &CMatrix, diag: &[f64], cols: usize) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..cols {
        let v = vectors.column(k);
        let d = Complex64::new(diag[k], 0.0);
        out += (v * d) * v.adjoint();
    }
    out
}

/// Discretely orthonormal polynomials `q_0, ..., q_n` in `x` under weights
/// `w`, built by Arnoldi iteration on multiplication by `x`.
///
/// `q` is row-major with one row per node. `h[k]` holds the Hessenberg
/// column `x q_k = sum_{j <= k+1} h[k][j] q_j`, and `q0` is the constant
/// value of `q_0`.
pub(crate) struct Arnoldi {
    pub q: Vec<Complex64>,
    pub stride: usize,
    pub cols: usize,
    pub h: Vec<Vec<Complex64>>,
    pub q0: f64,
}

impl Arnoldi {
    /// Stops early once a new direction keeps less than `stop_ratio` of its
    /// norm after orthogonalization.
    pub fn new(x: &[Complex64], w: &[f64], degree: usize, stop_ratio: f64) -> Result<Self> {
        let n = x.len();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical("quadrature weights vanish".into()));
        }
        let stride = degree + 1;
        let mut q = vec![Complex64::new(0.0, 0.0); n * stride];
        let q0 = total.sqrt().recip();
        for i in 0..n {
            q[i * stride] = Complex64::new(q0, 0.0);
        }
        let mut h = Vec::with_capacity(degree);
        let mut cols = 1;
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..degree {
            for i in 0..n {
                v[i] = x[i] * q[i * stride + k];
            }
            let before = weighted_norm(&v, w);
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for _ in 0..2 {
                let c = coefficients(&q, stride, cols, &v, w);
                subtract(&q, stride, &c, &mut v);
                col.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            }
            let after = weighted_norm(&v, w);
            if !(after > stop_ratio * before) {
                break;
            }
            col[k + 1] = Complex64::new(after, 0.0);
            for i in 0..n {
                q[i * stride + k + 1] = v[i] / after;
            }
            h.push(col);
            cols += 1;
        }
        Ok(Arnoldi { q, stride, cols, h, q0 })
    }

    /// `f - sum_j <f, q_j> q_j`, applied twice.
    pub fn remove_span(&self, f: &[Complex64], w: &[f64]) -> Vec<Complex64> {
        let mut r = f.to_vec();
        for _ in 0..2 {
            let c = coefficients(&self.q, self.stride, self.cols, &r, w);
            subtract(&self.q, self.stride, &c, &mut r);
        }
        r
    }
}

fn weighted_norm(v: &[Complex64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a.norm_sqr() * b).sum::<f64>().sqrt()
}

/// `c_j = sum_i w_i v_i conj(q[i][j])` for `j < cols`.
fn coefficients(q: &[Complex64], stride: usize, cols: usize, v: &[Complex64], w: &[f64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); cols];
    for (i, (vi, wi)) in v.iter().zip(w).enumerate() {
        let a = vi * *wi;
        for (cj, qij) in c.iter_mut().zip(&q[i * stride..i * stride + cols]) {
            *cj += a * qij.conj();
        }
    }
    c
}

fn subtract(q: &[Complex64], stride: usize, c: &[Complex64], v: &mut [Complex64]) {
    for (i, vi) in v.iter_mut().enumerate() {
        let s: Complex64 = c.iter().zip(&q[i * stride..i * stride + c.len()]).map(|(a, b)| a * b).sum();
        *vi -= s;
    }
}

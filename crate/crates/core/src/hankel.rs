//! Truncated Hankel operators `H_phi f = phi f - P(phi f)`.
//!
//! The operator is never written against a basis of the orthogonal
//! complement. Instead the residuals `(I - P)(phi e_n)` are formed at the
//! quadrature nodes and their Gram matrix is assembled; its eigenvalues are
//! the squared singular values of the compression of `H_phi` to the span of
//! the `e_n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bergman::{gram, orthonormalize, DegreeCap, GramMatrix, MonomialBasis, OrthonormalBasis};
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_norm, CMatrix};
use crate::quadrature::QuadratureRule;
use crate::symbol::Symbol;

const CHUNK: usize = 2048;

/// Singular values of one truncation, largest first.
#[derive(Debug, Clone, Serialize)]
pub struct HankelSpectrum {
    pub singular_values: Vec<f64>,
    pub degree_cap: Option<DegreeCap>,
    pub resolution: Option<usize>,
    pub domain_label: String,
    /// Smallest eigenvalue of the Gram before clipping.
    pub min_eigenvalue: f64,
}

impl HankelSpectrum {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Spectrum with every value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> HankelSpectrum {
        let mut out = self.clone();
        out.singular_values.iter_mut().for_each(|s| *s *= c);
        out.min_eigenvalue *= c * c;
        out
    }

    pub fn from_values(mut values: Vec<f64>, degree_cap: Option<DegreeCap>, label: impl Into<String>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let min_eigenvalue = values.last().map_or(0.0, |s| s * s);
        HankelSpectrum {
            singular_values: values,
            degree_cap,
            resolution: None,
            domain_label: label.into(),
            min_eigenvalue,
        }
    }
}

fn check_symbol(symbol: &Symbol, rule: &QuadratureRule) -> Result<()> {
    if let Some(support) = &symbol.support {
        if support != &rule.domain {
            return Err(Error::InvalidInput(format!(
                "symbol is restricted to {}, but the rule covers {}",
                support.label(),
                rule.domain.label()
            )));
        }
    }
    if symbol.variables() > rule.dimension() {
        return Err(Error::InvalidInput(format!(
            "symbol {} uses w on a planar domain",
            symbol.label()
        )));
    }
    Ok(())
}

/// Orthonormal functions sampled on `points`, one row per point.
fn sample_block(basis: &OrthonormalBasis, points: &[Point]) -> CMatrix {
    let k = basis.monomials.len();
    let mut e = CMatrix::zeros(points.len(), k);
    for (r, p) in points.iter().enumerate() {
        for (c, v) in basis.monomials.eval(p).into_iter().enumerate() {
            e[(r, c)] = v;
        }
    }
    e * &basis.transform
}

fn weighted_adjoint_product(a: &CMatrix, b: &CMatrix, w: &[f64]) -> CMatrix {
    let mut wb = b.clone();
    for (r, wr) in w.iter().enumerate() {
        wb.row_mut(r).iter_mut().for_each(|v| *v *= *wr);
    }
    a.adjoint() * wb
}

fn sum_partials(parts: Vec<CMatrix>, rows: usize, cols: usize) -> CMatrix {
    parts.into_iter().fold(CMatrix::zeros(rows, cols), |acc, p| acc + p)
}

/// Hankel Gram with projection onto the span of `projection`:
/// `M[n][m] = <R_m, R_n>` with `R_n = phi e_n - P(phi e_n)`.
///
/// The residuals are formed explicitly in two passes over node chunks,
/// which keeps `M` positive semidefinite by construction.
pub fn hankel_gram_projected(
    symbol: &Symbol,
    basis: &OrthonormalBasis,
    projection: &OrthonormalBasis,
    rule: &QuadratureRule,
) -> Result<CMatrix> {
    check_symbol(symbol, rule)?;
    let (rd, rp) = (basis.retained_rank, projection.retained_rank);
    let chunks = rule.len().div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(rule.len());
    let block = |c: usize| {
        let nodes = &rule.nodes[range(c)];
        let mut f = sample_block(basis, nodes);
        for (r, p) in nodes.iter().enumerate() {
            let phi = symbol.eval(p);
            if !phi.re.is_finite() || !phi.im.is_finite() {
                return Err(Error::Numerical(format!(
                    "symbol {} is not finite at a quadrature node",
                    symbol.label()
                )));
            }
            f.row_mut(r).iter_mut().for_each(|v| *v *= phi);
        }
        Ok((f, sample_block(projection, nodes)))
    };

    // pass 1: coefficients C = Pb^H W F of P(phi e_n)
    let parts = crate::par::map_collect(chunks, |c| {
        let (f, pb) = block(c)?;
        Ok(weighted_adjoint_product(&pb, &f, &rule.weights[range(c)]))
    });
    let coeff = sum_partials(parts.into_iter().collect::<Result<Vec<_>>>()?, rp, rd);

    // pass 2: residual Gram
    let parts = crate::par::map_collect(chunks, |c| {
        let (f, pb) = block(c)?;
        let resid = f - pb * &coeff;
        Ok(weighted_adjoint_product(&resid, &resid, &rule.weights[range(c)]))
    });
    let m = sum_partials(parts.into_iter().collect::<Result<Vec<_>>>()?, rd, rd);
    // the entries above are <R_m, R_n> indexed [m][n]; store [n][m]
    Ok(m.transpose())
}

/// Hankel Gram with projection onto the same truncated space as the basis.
pub fn hankel_gram(symbol: &Symbol, basis: &OrthonormalBasis, rule: &QuadratureRule) -> Result<CMatrix> {
    hankel_gram_projected(symbol, basis, basis, rule)
}

/// Square roots of the eigenvalues of a Hankel Gram, clipped at zero.
pub fn singular_spectrum(m: &CMatrix) -> Result<HankelSpectrum> {
    let eig = hermitian_eigen(m)?;
    let norm = hermitian_norm(&eig.values);
    let min_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -1e-6 * norm {
        return Err(Error::Numerical(format!(
            "Hankel Gram has eigenvalue {min_eigenvalue:e} below -1e-6 * {norm:e}: assembly error"
        )));
    }
    let singular_values = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(HankelSpectrum {
        singular_values,
        degree_cap: None,
        resolution: None,
        domain_label: String::new(),
        min_eigenvalue,
    })
}

/// Shared state for spectra at several caps on one rule: a single large
/// Gram at `max_cap + margin` from which both the projection basis and the
/// per-cap domain bases are cut.
#[derive(Debug, Clone)]
pub struct HankelAssembler {
    pub rule: QuadratureRule,
    pub projection: OrthonormalBasis,
    pub threshold: f64,
    gram: GramMatrix,
}

impl HankelAssembler {
    pub fn new(rule: QuadratureRule, max_cap: DegreeCap, margin: u32, threshold: f64) -> Result<Self> {
        let monomials = MonomialBasis::for_rule(&rule, max_cap.widened(margin))?;
        let gram = gram(&monomials, &rule)?;
        let projection = orthonormalize(&gram, threshold)?;
        Ok(HankelAssembler { rule, projection, threshold, gram })
    }

    /// Orthonormal basis of the monomials admitted by `cap`.
    pub fn domain_basis(&self, cap: DegreeCap) -> Result<OrthonormalBasis> {
        let sub = self.gram.restrict(cap);
        if sub.basis.is_empty() || !cap.precedes(&self.gram.basis.cap) && cap != self.gram.basis.cap {
            return Err(Error::InvalidInput(format!(
                "cap {cap} exceeds the assembled cap {}",
                self.gram.basis.cap
            )));
        }
        orthonormalize(&sub, self.threshold)
    }

    pub fn gram_for(&self, symbol: &Symbol, cap: DegreeCap) -> Result<CMatrix> {
        hankel_gram_projected(symbol, &self.domain_basis(cap)?, &self.projection, &self.rule)
    }

    pub fn spectrum(&self, symbol: &Symbol, cap: DegreeCap) -> Result<HankelSpectrum> {
        let mut s = singular_spectrum(&self.gram_for(symbol, cap)?)?;
        s.degree_cap = Some(cap);
        s.resolution = Some(self.rule.resolution);
        s.domain_label = self.rule.domain.label();
        Ok(s)
    }
}

/// `||(I - P) g||` for node samples `g`, with `P` onto `projection`.
pub fn residual_norm(projection: &OrthonormalBasis, rule: &QuadratureRule, samples: &[Complex64]) -> f64 {
    let proj = crate::bergman::Projector::new(projection, rule);
    let pg = proj.apply(samples);
    let diff: Vec<Complex64> = samples.iter().zip(&pg).map(|(a, b)| a - b).collect();
    rule.norm(&diff)
}

/// Frobenius-style max-entry size, used by null tests.
pub fn max_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Diagonal Gram for hand-built spectra.
pub fn diagonal(values: &[f64]) -> CMatrix {
    DMatrix::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

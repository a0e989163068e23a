//! Compactness diagnostics: verdicts over truncation families and
//! finite-rank certificates `||T h|| <= eps ||h|| + ||K h||`.
//!
//! Finitely many truncations can never prove compactness, so verdicts only
//! say whether a family is *consistent* with it. Compressions to nested
//! subspaces have non-decreasing `sigma_k` (interlacing); for a compact
//! operator the value at a fixed index stabilizes, while for a non-compact
//! one it keeps climbing as multiplicities fill in.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::HankelSpectrum;
use crate::linalg::{hermitian_eigen, reassemble, spectral_norm, CMatrix};

/// Spectra of one symbol on one domain at increasing truncations.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationFamily {
    pub spectra: Vec<HankelSpectrum>,
}

impl TruncationFamily {
    /// Requires at least three members at strictly increasing caps (or,
    /// for hand-built spectra without caps, strictly increasing sizes).
    pub fn new(spectra: Vec<HankelSpectrum>) -> Result<Self> {
        if spectra.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a truncation family needs at least 3 members, got {}",
                spectra.len()
            )));
        }
        for pair in spectra.windows(2) {
            let increasing = match (pair[0].degree_cap, pair[1].degree_cap) {
                (Some(a), Some(b)) => a.precedes(&b),
                _ => pair[0].len() < pair[1].len(),
            };
            if !increasing {
                return Err(Error::InvalidInput("truncation family is not strictly increasing".into()));
            }
        }
        if spectra.iter().any(HankelSpectrum::is_empty) {
            return Err(Error::InvalidInput("truncation family has an empty member".into()));
        }
        Ok(TruncationFamily { spectra })
    }

    pub fn smallest_size(&self) -> usize {
        self.spectra.iter().map(HankelSpectrum::len).min().unwrap_or(0)
    }

    /// Common tail index `k* = floor(smallest size / 2)` (0-based).
    pub fn tail_index(&self) -> usize {
        self.smallest_size() / 2
    }

    pub fn scaled(&self, c: f64) -> TruncationFamily {
        TruncationFamily { spectra: self.spectra.iter().map(|s| s.scaled(c)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictLabel {
    CompactConsistent,
    NonCompactConsistent,
    Inconclusive,
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictLabel::CompactConsistent => "CompactConsistent",
            VerdictLabel::NonCompactConsistent => "NonCompactConsistent",
            VerdictLabel::Inconclusive => "Inconclusive",
        })
    }
}

/// Calibration knobs of the verdict; recorded with every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Plateau level for the non-compact label; defaults to
    /// `0.1 * sigma_max` of the smallest member.
    pub plateau_floor: Option<f64>,
    /// Largest log-log decay slope accepted as compact.
    pub slope_ceiling: f64,
    /// Relative growth of `sigma_{k*}` between consecutive members still
    /// counted as stabilized.
    pub growth_tolerance: f64,
    /// Spectra entirely below this are the zero operator.
    pub zero_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { plateau_floor: None, slope_ceiling: -0.5, growth_tolerance: 0.05, zero_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessVerdict {
    pub label: VerdictLabel,
    /// Max over members of `sigma_{k*}`.
    pub tail_statistic: f64,
    /// Least-squares slope of `log sigma_k` against `log k` on the largest
    /// member (NaN when fewer than two values are resolved).
    pub decay_slope: f64,
    pub tail_index: usize,
    pub tail_values: Vec<f64>,
    pub plateau_floor: f64,
    pub thresholds: Thresholds,
}

fn log_log_slope(values: &[f64], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > floor)
        .map(|(k, &s)| (((k + 1) as f64).ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Deterministic verdict from the tail trend and the decay slope.
pub fn verdict(family: &TruncationFamily, thresholds: &Thresholds) -> CompactnessVerdict {
    let k = family.tail_index();
    let tail_values: Vec<f64> = family.spectra.iter().map(|s| s.singular_values[k]).collect();
    let tail_statistic = tail_values.iter().copied().fold(0.0, f64::max);
    let largest = family.spectra.last().expect("family has members");
    let sigma_top = largest.sigma_max();
    let floor = thresholds.zero_floor.max(1e-12 * sigma_top);
    let decay_slope = log_log_slope(&largest.singular_values, floor);
    let plateau_floor = thresholds
        .plateau_floor
        .unwrap_or(0.1 * family.spectra[0].sigma_max());

    let all_zero = family.spectra.iter().all(|s| s.sigma_max() <= thresholds.zero_floor);
    let stabilized = tail_values
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + thresholds.growth_tolerance));
    let label = if all_zero || (stabilized && decay_slope <= thresholds.slope_ceiling) {
        VerdictLabel::CompactConsistent
    } else if tail_values.iter().all(|&s| s >= plateau_floor) {
        VerdictLabel::NonCompactConsistent
    } else {
        VerdictLabel::Inconclusive
    };
    CompactnessVerdict {
        label,
        tail_statistic,
        decay_slope,
        tail_index: k,
        tail_values,
        plateau_floor,
        thresholds: *thresholds,
    }
}

/// One row of a trend table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub degree_cap: String,
    pub k: usize,
    pub sigma_k: f64,
}

/// `sigma_k` of every member, in family order.
pub fn essential_norm_proxy(family: &TruncationFamily, k: usize) -> Result<Vec<TrendRow>> {
    if k >= family.smallest_size() {
        return Err(Error::InvalidInput(format!(
            "index {k} is not below the smallest truncation size {}",
            family.smallest_size()
        )));
    }
    Ok(family
        .spectra
        .iter()
        .map(|s| TrendRow {
            degree_cap: s.degree_cap.map_or_else(|| s.len().to_string(), |c| c.to_string()),
            k,
            sigma_k: s.singular_values[k],
        })
        .collect())
}

/// CSV with columns `degree_cap,k,sigma_k`.
pub fn trend_csv(rows: &[TrendRow]) -> String {
    let mut out = String::from("degree_cap,k,sigma_k\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.17e}\n", r.degree_cap, r.k, r.sigma_k));
    }
    out
}

/// Finite-rank certificate for the square-root factor `T = M^{1/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct CompactnessCertificate {
    pub epsilon: f64,
    pub rank: usize,
    /// `sigma_{rank+1}` of `T`, zero when the rank is full.
    pub residual_norm: f64,
    pub singular_values: Vec<f64>,
    /// The rank reached the full dimension while `sigma_min > epsilon`.
    pub degenerate: bool,
    #[serde(skip)]
    pub t: CMatrix,
    #[serde(skip)]
    pub k: CMatrix,
}

/// Best rank-`k` approximation of `T = M^{1/2}` with minimal `k` such that
/// `sigma_{k+1} <= epsilon`.
pub fn certificate(m: &CMatrix, epsilon: f64) -> Result<CompactnessCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let eig = hermitian_eigen(m)?;
    let norm = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    if eig.values.last().is_some_and(|&v| v < -1e-6 * norm) {
        return Err(Error::Numerical("certificate input is not positive semidefinite".into()));
    }
    let sigma: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let n = sigma.len();
    let rank = sigma.iter().position(|&s| s <= epsilon).unwrap_or(n);
    let residual_norm = sigma.get(rank).copied().unwrap_or(0.0);
    let t = reassemble(&eig.vectors, &sigma, n);
    let k = reassemble(&eig.vectors, &sigma, rank);
    Ok(CompactnessCertificate {
        epsilon,
        rank,
        residual_norm,
        degenerate: rank == n && n > 0 && sigma[n - 1] > epsilon,
        singular_values: sigma,
        t,
        k,
    })
}

impl CompactnessCertificate {
    /// `| ||T - K|| - sigma_{rank+1} |` relative to `||T||`.
    pub fn exactness_gap(&self) -> f64 {
        let diff = spectral_norm(&(&self.t - &self.k));
        let scale = self.singular_values.first().copied().unwrap_or(0.0);
        if scale == 0.0 {
            diff
        } else {
            (diff - self.residual_norm).abs() / scale
        }
    }

    /// `(||T h||, eps ||h|| + ||K h||)`.
    pub fn inequality_sides(&self, h: &[Complex64]) -> (f64, f64) {
        let v = DVector::from_column_slice(h);
        let lhs = (&self.t * &v).norm();
        let rhs = self.epsilon * v.norm() + (&self.k * &v).norm();
        (lhs, rhs)
    }
}

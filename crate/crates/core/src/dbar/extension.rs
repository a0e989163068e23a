//! Extension of holomorphic functions from a lens `Omega ∩ B(p, r)` to
//! `Omega`, with error controlled on the smaller lens `Omega ∩ B(p, r - delta)`.
//!
//! With `r1 = r - delta`, `r2 = (r1 + r) / 2` and `psi = |z - p|^2 - r2^2`,
//! the extension is `E f = chi f - u_k` where `chi` is a radial cutoff equal
//! to one inside `B(p, r2)` and `u_k` is the minimal solution of
//! `dbar u = f dbar chi` in `L^2(e^{-k psi})`. Larger `k` pushes `u_k` away
//! from the inner region, so `E f -> f` there.

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::quadrature::{build_lattice_quadrature, QuadratureRule};

use super::cauchy::CauchyOperator;
use super::hormander::{remove_holomorphic_part, report, weight_factor, HormanderOptions, HormanderReport, WeightedDbarProblem};
use super::stencil::DbarStencil;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtensionOptions {
    pub hormander: HormanderOptions,
    /// Relative `dbar` residual of the input accepted as holomorphic.
    pub holomorphy_tolerance: f64,
    /// Cutoff transition `[a, b]` as fractions of `(r2, r)`.
    pub transition: (f64, f64),
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            hormander: HormanderOptions { degree: 28, threshold: 1e-13, residual_tolerance: f64::INFINITY },
            holomorphy_tolerance: 0.05,
            transition: (0.55, 0.95),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionStep {
    pub k: f64,
    pub achieved_error: f64,
    pub report: HormanderReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionResult {
    #[serde(skip)]
    pub samples: Vec<Complex64>,
    pub achieved_error: f64,
    pub used_k: f64,
    pub converged: bool,
    pub sweep: Vec<ExtensionStep>,
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, with its derivative.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |s: f64| (-1.0 / s).exp();
    let df = |s: f64| (-1.0 / s).exp() / (s * s);
    let (a, b) = (f(t), f(1.0 - t));
    let (da, db) = (df(t), -df(1.0 - t));
    let s = a + b;
    (a / s, (da * s - a * (da + db)) / (s * s))
}

/// Discretized extension operator for one lens.
pub struct ExtensionOperator {
    pub center: Complex64,
    pub radius: f64,
    pub delta: f64,
    pub r1: f64,
    pub r2: f64,
    rule: QuadratureRule,
    op: CauchyOperator,
    stencil: DbarStencil,
    chi: Vec<f64>,
    dbar_chi: Vec<Complex64>,
    psi: Vec<f64>,
    lens: Vec<bool>,
    inner: Vec<bool>,
    options: ExtensionOptions,
}

impl ExtensionOperator {
    pub fn new(
        base: &Domain,
        center: Complex64,
        radius: f64,
        delta: f64,
        resolution: usize,
        options: ExtensionOptions,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < radius) {
            return Err(Error::InvalidInput(format!("delta must lie in (0, r), got {delta} with r = {radius}")));
        }
        let (ta, tb) = options.transition;
        if !(0.0 < ta && ta < tb && tb < 1.0) {
            return Err(Error::InvalidInput(format!("transition fractions must satisfy 0 < a < b < 1, got ({ta}, {tb})")));
        }
        // validates that p lies on the boundary and the lens is connected
        let lens_domain = Domain::lens(base.clone(), center, radius)?;
        if !crate::domain::flood_fill_connected(&lens_domain, resolution)? {
            return Err(Error::Geometry(format!("{} is disconnected at resolution {resolution}", lens_domain.label())));
        }
        let rule = build_lattice_quadrature(base, resolution)?;
        let op = CauchyOperator::new(&rule, None)?;
        let stencil = DbarStencil::new(&rule)?;
        let r1 = radius - delta;
        let r2 = 0.5 * (r1 + radius);
        let a = r2 + ta * (radius - r2);
        let b = r2 + tb * (radius - r2);
        let mut chi = Vec::with_capacity(rule.len());
        let mut dbar_chi = Vec::with_capacity(rule.len());
        let mut psi = Vec::with_capacity(rule.len());
        let mut lens = Vec::with_capacity(rule.len());
        let mut inner = Vec::with_capacity(rule.len());
        for z in rule.planar_nodes() {
            let d = (z - center).norm();
            let (s, ds) = smooth_step((d - a) / (b - a));
            chi.push(1.0 - s);
            // dbar chi = chi'(d) (z - p) / (2 d)
            dbar_chi.push(if d > 0.0 { -ds / (b - a) * (z - center) / (2.0 * d) } else { Complex64::new(0.0, 0.0) });
            psi.push(d * d - r2 * r2);
            lens.push(d < radius);
            inner.push(d < r1);
        }
        if !inner.iter().any(|&x| x) {
            return Err(Error::Geometry("the inner lens contains no lattice nodes".into()));
        }
        Ok(ExtensionOperator { center, radius, delta, r1, r2, rule, op, stencil, chi, dbar_chi, psi, lens, inner, options })
    }

    /// Lattice rule on the base domain; extensions are sampled on its nodes.
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Base-rule indices of the nodes inside the lens.
    pub fn lens_nodes(&self) -> Vec<usize> {
        (0..self.rule.len()).filter(|&k| self.lens[k]).collect()
    }

    pub fn inner_mask(&self) -> &[bool] {
        &self.inner
    }

    /// Samples of `f` on the lens nodes, in [`Self::lens_nodes`] order.
    pub fn sample_on_lens<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        self.lens_nodes().into_iter().map(|k| f(self.rule.nodes[k].z())).collect()
    }

    fn embed(&self, f_lens: &[Complex64]) -> Result<Vec<Complex64>> {
        let idx = self.lens_nodes();
        if f_lens.len() != idx.len() {
            return Err(Error::InvalidInput(format!("{} samples for {} lens nodes", f_lens.len(), idx.len())));
        }
        let mut f = vec![Complex64::new(0.0, 0.0); self.rule.len()];
        for (k, v) in idx.into_iter().zip(f_lens) {
            f[k] = *v;
        }
        Ok(f)
    }

    /// Relative discrete `dbar` residual of `f` on lens nodes with a full
    /// centered stencil inside the lens.
    pub fn holomorphy_defect(&self, f_lens: &[Complex64]) -> Result<f64> {
        let f = self.embed(f_lens)?;
        let mask = self.stencil.interior_within(&self.lens);
        let df = self.stencil.apply(&f);
        let norm = self.rule.masked_norm(&f, &mask);
        let defect = self.rule.masked_norm(&df, &mask);
        Ok(if norm > 0.0 { defect / norm } else { defect })
    }

    fn inner_error(&self, f: &[Complex64], ef: &[Complex64]) -> f64 {
        let diff: Vec<Complex64> = f.iter().zip(ef).map(|(a, b)| a - b).collect();
        let num = self.rule.masked_norm(&diff, &self.inner);
        let den = self.rule.masked_norm(f, &self.inner);
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }

    /// Extension for each `k` in `ks` (independent solves).
    pub fn sweep(&self, f_lens: &[Complex64], ks: &[f64]) -> Result<Vec<(ExtensionStep, Vec<Complex64>)>> {
        let defect = self.holomorphy_defect(f_lens)?;
        if defect > self.options.holomorphy_tolerance {
            return Err(Error::InvalidInput(format!(
                "input is not holomorphic on the lens: relative dbar residual {defect:.3e}"
            )));
        }
        let f = self.embed(f_lens)?;
        let g: Vec<Complex64> = f.iter().zip(&self.dbar_chi).map(|(a, b)| a * b).collect();
        let chi_f: Vec<Complex64> = f.iter().zip(&self.chi).map(|(a, c)| a * *c).collect();
        let u0 = self.op.solve(&g);
        ks.iter()
            .map(|&k| {
                if !(k >= 0.0) {
                    return Err(Error::InvalidInput(format!("weight scale must be >= 0, got {k}")));
                }
                let problem = WeightedDbarProblem::new(g.clone(), self.psi.clone(), k)?;
                let (u, rank) = if g.iter().all(|v| v.norm() == 0.0) {
                    (vec![Complex64::new(0.0, 0.0); g.len()], 0)
                } else {
                    remove_holomorphic_part(&self.rule, &u0, &weight_factor(&self.psi, k), &self.options.hormander)?
                };
                let ef: Vec<Complex64> = chi_f.iter().zip(&u).map(|(a, b)| a - b).collect();
                let step = ExtensionStep {
                    k,
                    achieved_error: self.inner_error(&f, &ef),
                    report: report(&self.rule, &self.stencil, &problem, &u, rank),
                };
                Ok((step, ef))
            })
            .collect()
    }

    /// Doubles `k` from 1 up to `k_max`, stopping at the first `k` whose
    /// inner error is at most `epsilon`. Non-convergence is reported, not
    /// an error.
    pub fn extend(&self, f_lens: &[Complex64], epsilon: f64, k_max: f64) -> Result<ExtensionResult> {
        if !(epsilon > 0.0) || !(k_max >= 1.0) {
            return Err(Error::InvalidInput(format!("need epsilon > 0 and k_max >= 1, got {epsilon}, {k_max}")));
        }
        let mut sweep = Vec::new();
        let mut k = 1.0;
        let mut last = None;
        while k <= k_max {
            let (step, ef) = self.sweep(f_lens, &[k])?.pop().expect("one step");
            let done = step.achieved_error <= epsilon;
            sweep.push(step);
            last = Some(ef);
            if done {
                break;
            }
            k *= 2.0;
        }
        let final_step = sweep.last().expect("k_max >= 1 gives a step");
        Ok(ExtensionResult {
            achieved_error: final_step.achieved_error,
            used_k: final_step.k,
            converged: final_step.achieved_error <= epsilon,
            samples: last.expect("at least one step"),
            sweep,
        })
    }
}

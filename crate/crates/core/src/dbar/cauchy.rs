//! Punctured Cauchy transform `u(z) = -(1/pi) sum w g / (xi - z)` and its
//! near/far split.
//!
//! On lattice rules the sum is a discrete convolution and is evaluated with
//! zero-padded 2D FFTs; other rules use direct summation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Cauchy kernel `-(1/pi) / d` for displacement `d = xi - z`.
fn cauchy_kernel(d: Complex64) -> Complex64 {
    -d.inv() / PI
}

/// Zero-padded FFT layout of a lattice rule.
struct FftGrid {
    px: usize,
    py: usize,
    spacing: f64,
    /// Grid slot `(i, j)` of every node, shifted to start at zero.
    slots: Vec<(usize, usize)>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl FftGrid {
    fn new(rule: &QuadratureRule) -> Option<Self> {
        let lattice = rule.lattice.as_ref()?;
        if rule.is_empty() {
            return None;
        }
        let (i0, i1, j0, j1) = lattice.extent();
        let nx = (i1 - i0 + 1) as usize;
        let ny = (j1 - j0 + 1) as usize;
        let (px, py) = ((2 * nx).next_power_of_two(), (2 * ny).next_power_of_two());
        let slots = lattice
            .indices
            .iter()
            .map(|&(i, j)| ((i - i0) as usize, (j - j0) as usize))
            .collect();
        let mut planner = FftPlanner::new();
        Some(FftGrid {
            px,
            py,
            spacing: lattice.spacing,
            slots,
            fwd_x: planner.plan_fft_forward(px),
            inv_x: planner.plan_fft_inverse(px),
            fwd_y: planner.plan_fft_forward(py),
            inv_y: planner.plan_fft_inverse(py),
        })
    }

    /// In-place 2D transform of a row-major `py x px` array.
    fn fft2(&self, data: &mut [Complex64], forward: bool) {
        let (fx, fy) = if forward { (&self.fwd_x, &self.fwd_y) } else { (&self.inv_x, &self.inv_y) };
        fx.process(data);
        let mut col = vec![ZERO; self.py];
        for i in 0..self.px {
            for j in 0..self.py {
                col[j] = data[j * self.px + i];
            }
            fy.process(&mut col);
            for j in 0..self.py {
                data[j * self.px + i] = col[j];
            }
        }
    }

    /// Spectrum of the reflected kernel `Kr[a] = K(-a h)` on the padded grid.
    fn kernel_spectrum(&self, kernel: &dyn Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        let (px, py) = (self.px, self.py);
        let mut data = vec![ZERO; px * py];
        let half_x = (px / 2) as i64;
        let half_y = (py / 2) as i64;
        for b in 0..py {
            let db = if (b as i64) < half_y { b as i64 } else { b as i64 - py as i64 };
            for a in 0..px {
                let da = if (a as i64) < half_x { a as i64 } else { a as i64 - px as i64 };
                // u[i] = sum_k G[k] K((k - i) h) = sum_k G[k] Kr[i - k]
                let d = Complex64::new(-(da as f64), -(db as f64)) * self.spacing;
                data[b * px + a] = kernel(d);
            }
        }
        self.fft2(&mut data, true);
        data
    }

    fn convolve(&self, spectrum: &[Complex64], values: &[Complex64]) -> Vec<Complex64> {
        let mut data = vec![ZERO; self.px * self.py];
        for (&(i, j), v) in self.slots.iter().zip(values) {
            data[j * self.px + i] = *v;
        }
        self.fft2(&mut data, true);
        for (d, s) in data.iter_mut().zip(spectrum) {
            *d *= s;
        }
        self.fft2(&mut data, false);
        let scale = 1.0 / (self.px * self.py) as f64;
        self.slots.iter().map(|&(i, j)| data[j * self.px + i] * scale).collect()
    }
}

/// Discrete solution operator of `dbar u = g` by the punctured Cauchy sum.
pub struct CauchyOperator {
    rule: QuadratureRule,
    puncture: f64,
    nodes: Vec<Complex64>,
    grid: Option<FftGrid>,
}

impl std::fmt::Debug for CauchyOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyOperator")
            .field("nodes", &self.nodes.len())
            .field("puncture", &self.puncture)
            .field("fft", &self.grid.is_some())
            .finish()
    }
}

impl CauchyOperator {
    /// `puncture` defaults to 1.5 lattice spacings; it must be at least one
    /// cell diameter.
    pub fn new(rule: &QuadratureRule, puncture: Option<f64>) -> Result<Self> {
        if rule.dimension() != 1 {
            return Err(Error::InvalidInput("the Cauchy transform needs a planar rule".into()));
        }
        let diameter = rule.cell_diameter();
        let puncture = puncture.unwrap_or(match &rule.lattice {
            Some(l) => 1.5 * l.spacing,
            None => diameter,
        });
        if !(puncture >= diameter * (1.0 - 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "puncture radius {puncture} is below the cell diameter {diameter}"
            )));
        }
        Ok(CauchyOperator {
            rule: rule.clone(),
            puncture,
            nodes: rule.planar_nodes(),
            grid: FftGrid::new(rule),
        })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn puncture(&self) -> f64 {
        self.puncture
    }

    pub fn uses_fft(&self) -> bool {
        self.grid.is_some()
    }

    /// Kernel restricted to `inner <= |xi - z| < outer`.
    pub fn band(&self, inner: f64, outer: f64) -> BandOperator<'_> {
        let kernel = move |d: Complex64| {
            let r = d.norm();
            if r >= inner && r < outer {
                cauchy_kernel(d)
            } else {
                ZERO
            }
        };
        let spectrum = self.grid.as_ref().map(|g| g.kernel_spectrum(&kernel));
        BandOperator { op: self, inner, outer, spectrum }
    }

    /// `u = S g` at every node.
    pub fn solve(&self, g: &[Complex64]) -> Vec<Complex64> {
        self.band(self.puncture, f64::INFINITY).apply(g)
    }

    /// Reference O(N^2) evaluation of `S g`.
    pub fn solve_direct(&self, g: &[Complex64]) -> Vec<Complex64> {
        self.band(self.puncture, f64::INFINITY).apply_direct(g)
    }

    /// `S = A_eps + B_eps` by the indicator of `|xi - z| < eps`.
    pub fn split(&self, epsilon: f64) -> Result<KernelSplit<'_>> {
        if !(epsilon >= self.puncture) {
            return Err(Error::InvalidInput(format!(
                "split radius {epsilon} is below the puncture radius {}",
                self.puncture
            )));
        }
        Ok(KernelSplit {
            epsilon,
            near: self.band(self.puncture, epsilon),
            far: self.band(epsilon, f64::INFINITY),
            factor: None,
        })
    }

    /// `sum_z w_z sum_xi w_xi |kernel(z, xi)|^2` for a band kernel scaled by
    /// `|factor(xi)|^2`.
    fn band_hs_sq(&self, inner: f64, outer: f64, factor_sq: &[f64]) -> f64 {
        let w = &self.rule.weights;
        let src: Vec<Complex64> = w.iter().zip(factor_sq).map(|(a, b)| Complex64::new(a * b, 0.0)).collect();
        let kernel_sq = move |d: Complex64| {
            let r = d.norm();
            if r >= inner && r < outer {
                Complex64::new(1.0 / (PI * PI * r * r), 0.0)
            } else {
                ZERO
            }
        };
        let field = match &self.grid {
            Some(g) => g.convolve(&g.kernel_spectrum(&kernel_sq), &src),
            None => self.direct_sum(&src, &kernel_sq),
        };
        field.iter().zip(w).map(|(f, wz)| f.re * wz).sum::<f64>().max(0.0)
    }

    fn direct_sum(&self, values: &[Complex64], kernel: &(dyn Fn(Complex64) -> Complex64 + Sync)) -> Vec<Complex64> {
        let nodes = &self.nodes;
        crate::par::map_collect(nodes.len(), |k| {
            let z = nodes[k];
            nodes
                .iter()
                .zip(values)
                .map(|(xi, v)| if *v == ZERO { ZERO } else { kernel(xi - z) * v })
                .sum()
        })
    }
}

/// The Cauchy kernel restricted to an annulus of displacements.
pub struct BandOperator<'a> {
    op: &'a CauchyOperator,
    pub inner: f64,
    pub outer: f64,
    spectrum: Option<Vec<Complex64>>,
}

impl BandOperator<'_> {
    /// `u(z) = -(1/pi) sum_{inner <= |xi - z| < outer} w g / (xi - z)`.
    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(g.len(), self.op.nodes.len());
        let wg: Vec<Complex64> = g.iter().zip(&self.op.rule.weights).map(|(v, w)| v * *w).collect();
        match (&self.op.grid, &self.spectrum) {
            (Some(grid), Some(s)) => grid.convolve(s, &wg),
            _ => self.direct(&wg),
        }
    }

    pub fn apply_direct(&self, g: &[Complex64]) -> Vec<Complex64> {
        let wg: Vec<Complex64> = g.iter().zip(&self.op.rule.weights).map(|(v, w)| v * *w).collect();
        self.direct(&wg)
    }

    fn direct(&self, wg: &[Complex64]) -> Vec<Complex64> {
        let (inner, outer) = (self.inner, self.outer);
        self.op.direct_sum(wg, &move |d: Complex64| {
            let r = d.norm();
            if r >= inner && r < outer {
                cauchy_kernel(d)
            } else {
                ZERO
            }
        })
    }

    /// Adjoint in the weighted inner product: `-conj(band(conj v))`.
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = v.iter().map(|x| x.conj()).collect();
        self.apply(&conj).into_iter().map(|x| -x.conj()).collect()
    }
}

/// Near part `A_eps` (`|xi - z| < eps`) and far part `B_eps` of the
/// operator `f -> S(a f)`, where `a` is an optional multiplier such as the
/// `dbar` of a symbol.
pub struct KernelSplit<'a> {
    pub epsilon: f64,
    pub near: BandOperator<'a>,
    pub far: BandOperator<'a>,
    factor: Option<Vec<Complex64>>,
}

impl KernelSplit<'_> {
    pub fn with_factor(mut self, factor: Vec<Complex64>) -> Self {
        assert_eq!(factor.len(), self.near.op.nodes.len());
        self.factor = Some(factor);
        self
    }

    fn scaled(&self, f: &[Complex64]) -> Vec<Complex64> {
        match &self.factor {
            Some(a) => f.iter().zip(a).map(|(x, y)| x * y).collect(),
            None => f.to_vec(),
        }
    }

    pub fn apply_near(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.near.apply(&self.scaled(f))
    }

    pub fn apply_far(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.far.apply(&self.scaled(f))
    }

    /// Power-iteration estimate of the weighted operator norm of `A_eps`.
    pub fn near_norm(&self, iterations: usize) -> f64 {
        let rule = &self.near.op.rule;
        let n = rule.len();
        let mut x: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(1.0 + 0.37 * ((k * 7919) % 101) as f64 / 101.0, 0.0))
            .collect();
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let nx = rule.norm(&x);
            if nx == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let ax = self.apply_near(&x);
            let next = estimate;
            estimate = rule.norm(&ax);
            // A* A x
            let mut back = self.near.apply_adjoint(&ax);
            if let Some(a) = &self.factor {
                back.iter_mut().zip(a).for_each(|(b, f)| *b *= f.conj());
            }
            x = back;
            if estimate == 0.0 || (estimate - next).abs() <= 1e-9 * estimate {
                break;
            }
        }
        estimate
    }

    /// Discrete Hilbert–Schmidt norm of `B_eps`.
    pub fn far_hs_norm(&self) -> f64 {
        let op = self.far.op;
        let factor_sq: Vec<f64> = match &self.factor {
            Some(a) => a.iter().map(|v| v.norm_sqr()).collect(),
            None => vec![1.0; op.nodes.len()],
        };
        op.band_hs_sq(self.far.inner, self.far.outer, &factor_sq).sqrt()
    }
}

/// `sqrt(sum_z sum_xi w_z w_xi |k(z, xi)|^2)` for an arbitrary kernel.
pub fn hs_norm<K>(rule: &QuadratureRule, kernel: K) -> f64
where
    K: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    let nodes = rule.planar_nodes();
    let rows = crate::par::map_collect(nodes.len(), |a| {
        nodes
            .iter()
            .zip(&rule.weights)
            .map(|(xi, w)| w * kernel(nodes[a], *xi).norm_sqr())
            .sum::<f64>()
            * rule.weights[a]
    });
    rows.iter().sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::quadrature::{build_lattice_quadrature, build_quadrature};

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fft_matches_direct_summation() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 32).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        assert!(op.uses_fft());
        let g: Vec<Complex64> = rule.planar_nodes().iter().map(|z| z.conj() * z + 0.5).collect();
        assert!(max_diff(&op.solve(&g), &op.solve_direct(&g)) < 1e-12);
        let band = op.band(0.1, 0.4);
        assert!(max_diff(&band.apply(&g), &band.apply_direct(&g)) < 1e-12);
    }

    #[test]
    fn zero_data_and_puncture_validation() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 16).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        let u = op.solve(&vec![ZERO; rule.len()]);
        assert!(u.iter().all(|v| v.norm() < 1e-15));
        assert!(CauchyOperator::new(&rule, Some(0.01)).is_err());
        assert!(op.split(0.5 * op.puncture()).is_err());
    }

    #[test]
    fn split_is_exact_and_degenerate_cases() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 32).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        let g: Vec<Complex64> = rule.planar_nodes().iter().map(|z| (z * 3.0).exp()).collect();
        let full = op.solve(&g);
        for eps in [0.1, 0.3, 0.7] {
            let s = op.split(eps).unwrap();
            let sum: Vec<Complex64> =
                s.apply_near(&g).iter().zip(s.apply_far(&g)).map(|(a, b)| a + b).collect();
            assert!(max_diff(&sum, &full) < 1e-10);
        }
        let wide = op.split(3.0).unwrap();
        assert!(wide.apply_far(&g).iter().all(|v| v.norm() < 1e-12));
        let tight = op.split(op.puncture()).unwrap();
        assert!(tight.apply_near(&g).iter().all(|v| v.norm() < 1e-12));
        assert_eq!(tight.near_norm(20), 0.0);
    }

    #[test]
    fn adjoint_identity() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 24).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        let band = op.band(op.puncture(), 0.5);
        let nodes = rule.planar_nodes();
        let f: Vec<Complex64> = nodes.iter().map(|z| z * z + Complex64::i()).collect();
        let v: Vec<Complex64> = nodes.iter().map(|z| z.conj().exp()).collect();
        let lhs = rule.inner(&band.apply(&f), &v);
        let rhs = rule.inner(&f, &band.apply_adjoint(&v));
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn hs_norm_of_constant_kernel() {
        let rule = build_quadrature(&Domain::unit_disc(), 32).unwrap();
        assert_eq!(hs_norm(&rule, |_, _| ZERO), 0.0);
        let c = Complex64::new(0.3, -0.4);
        assert!((hs_norm(&rule, |_, _| c) - 0.5 * PI).abs() < 1e-10);
    }

    #[test]
    fn far_hs_norm_matches_direct_kernel_sum() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 24).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        let split = op.split(0.55).unwrap();
        let direct = hs_norm(&rule, |z, xi| {
            let d = xi - z;
            if d.norm() >= 0.55 {
                cauchy_kernel(d)
            } else {
                ZERO
            }
        });
        assert!((split.far_hs_norm() - direct).abs() < 1e-10 * direct);
    }
}

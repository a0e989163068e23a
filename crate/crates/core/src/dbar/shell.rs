//! Shell weights `psi = gamma(rho)` with `rho = (|z - p|^2 - r^2) / eps` and
//! `gamma(t) = e^{2t} - 1`: bounded by `[-1, 0]` on the ball and with a
//! complex Hessian of order `1/eps` on a shell at its boundary.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Slack kept between the analytic Hessian and `1/eps` at the inner edge of
/// the shell, so finite-difference checks have room.
const SHELL_SLACK: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellWeight {
    pub epsilon: f64,
    pub center: Complex64,
    pub radius: f64,
    /// Thickness of the shell `r - delta <= |z - p| <= r` where the Hessian
    /// is at least `1.2 / eps`.
    pub delta: f64,
    pub profile: &'static str,
}

pub fn shell_weight(epsilon: f64, center: Complex64, radius: f64) -> Result<ShellWeight> {
    if !(epsilon > 0.0 && radius > 0.0) || !center.re.is_finite() || !center.im.is_finite() {
        return Err(Error::InvalidInput(format!(
            "shell weight needs epsilon > 0 and r > 0, got epsilon = {epsilon}, r = {radius}"
        )));
    }
    let mut w = ShellWeight { epsilon, center, radius, delta: 0.0, profile: "exp(2t) - 1" };
    let target = SHELL_SLACK / epsilon;
    w.delta = if w.hessian_at_distance(0.0) >= target {
        radius
    } else {
        // the Hessian increases with |z - p|
        let (mut lo, mut hi) = (0.0, radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if w.hessian_at_distance(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        radius - hi
    };
    Ok(w)
}

impl ShellWeight {
    pub fn rho(&self, z: Complex64) -> f64 {
        ((z - self.center).norm_sqr() - self.radius * self.radius) / self.epsilon
    }

    pub fn psi(&self, z: Complex64) -> f64 {
        (2.0 * self.rho(z)).exp() - 1.0
    }

    /// `d psi / d conj(z) = gamma'(rho) (z - p) / eps`.
    pub fn dbar_psi(&self, z: Complex64) -> Complex64 {
        2.0 * (2.0 * self.rho(z)).exp() * (z - self.center) / self.epsilon
    }

    fn hessian_at_distance(&self, d: f64) -> f64 {
        let rho = (d * d - self.radius * self.radius) / self.epsilon;
        let e = (2.0 * rho).exp();
        // gamma'' |d rho|^2 + gamma' d dbar rho
        4.0 * e * d * d / (self.epsilon * self.epsilon) + 2.0 * e / self.epsilon
    }

    /// Analytic `d^2 psi / dz dconj(z)`.
    pub fn hessian(&self, z: Complex64) -> f64 {
        self.hessian_at_distance((z - self.center).norm())
    }

    /// Second-difference Hessian `(sum of 4 neighbors - 4 psi) / (4 h^2)`.
    pub fn fd_hessian(&self, z: Complex64, h: f64) -> f64 {
        let s = [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)]
            .iter()
            .map(|d| self.psi(z + d))
            .sum::<f64>();
        (s - 4.0 * self.psi(z)) / (4.0 * h * h)
    }

    /// Smallest finite-difference Hessian over `samples` points on each of
    /// `rings` circles spanning the shell.
    pub fn min_fd_hessian_on_shell(&self, h: f64, rings: usize, samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..rings {
            let d = self.radius - self.delta * a as f64 / (rings.max(2) - 1) as f64;
            for b in 0..samples {
                let t = 2.0 * std::f64::consts::PI * b as f64 / samples as f64;
                let z = self.center + Complex64::from_polar(d, t);
                best = best.min(self.fd_hessian(z, h));
            }
        }
        best
    }
}

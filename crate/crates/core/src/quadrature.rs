//! Quadrature rules over model domains.
//!
//! Discs and annuli use polar tensor grids: equispaced angles (trapezoid,
//! exact for trigonometric moments below the angular count) times
//! Gauss–Legendre nodes in the radius, so radial monomial moments are exact
//! up to degree `resolution - 1`. The bidisc rule is the tensor product of
//! two polar rules. Lenses use a clipped Cartesian midpoint grid with one
//! level of subdivision on cells that straddle the boundary.
//!
//! [`build_lattice_quadrature`] builds a clipped Cartesian lattice without
//! subdivision; the dbar machinery needs its neighbor structure.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{flood_fill_connected, CellGrid, Domain, Point};
use crate::error::{Error, Result};

/// Lattice layout of a Cartesian rule: node `k` sits at
/// `origin + spacing * (i_k + i j_k)`.
#[derive(Debug, Clone, Serialize)]
pub struct Lattice {
    pub origin: Complex64,
    pub spacing: f64,
    pub indices: Vec<(i32, i32)>,
    #[serde(skip)]
    lookup: HashMap<(i32, i32), usize>,
}

impl Lattice {
    fn new(origin: Complex64, spacing: f64, indices: Vec<(i32, i32)>) -> Self {
        let lookup = indices.iter().enumerate().map(|(k, &ij)| (ij, k)).collect();
        Lattice { origin, spacing, indices, lookup }
    }

    /// Node index at lattice position `(i, j)`, if that cell is inside.
    pub fn node_at(&self, i: i32, j: i32) -> Option<usize> {
        self.lookup.get(&(i, j)).copied()
    }

    /// Inclusive index ranges `(i_min, i_max, j_min, j_max)`.
    pub fn extent(&self) -> (i32, i32, i32, i32) {
        let mut e = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for &(i, j) in &self.indices {
            e.0 = e.0.min(i);
            e.1 = e.1.max(i);
            e.2 = e.2.min(j);
            e.3 = e.3.max(j);
        }
        e
    }
}

/// Nodes and positive weights approximating Lebesgue measure on a domain.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub resolution: usize,
    pub lattice: Option<Lattice>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// First coordinates of all nodes.
    pub fn planar_nodes(&self) -> Vec<Complex64> {
        self.nodes.iter().map(Point::z).collect()
    }

    /// Same nodes with every weight multiplied by `factor[j]`. Nodes whose
    /// new weight is zero are kept so indices stay aligned.
    pub fn reweighted(&self, factor: &[f64]) -> QuadratureRule {
        assert_eq!(factor.len(), self.len());
        QuadratureRule {
            domain: self.domain.clone(),
            nodes: self.nodes.clone(),
            weights: self.weights.iter().zip(factor).map(|(w, f)| w * f).collect(),
            resolution: self.resolution,
            lattice: self.lattice.clone(),
        }
    }

    /// Typical cell diameter: lattice diagonal, or the diagonal of a square
    /// with the largest weight as area.
    pub fn cell_diameter(&self) -> f64 {
        match &self.lattice {
            Some(l) => l.spacing * 2f64.sqrt(),
            None => {
                let wmax = self.weights.iter().cloned().fold(0.0, f64::max);
                (2.0 * wmax).sqrt()
            }
        }
    }

    /// Discrete inner product `sum_j w_j f_j conj(g_j)`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| a * b.conj() * *w)
            .sum()
    }

    pub fn norm(&self, f: &[Complex64]) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .map(|(w, a)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Norm restricted to the nodes selected by `mask`.
    pub fn masked_norm(&self, f: &[Complex64], mask: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((w, a), _)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// three-term recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * p - prev) / (t * t - 1.0);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Polar rule over `inner < |z| < outer`.
fn polar_rule(inner: f64, outer: f64, resolution: usize) -> (Vec<Complex64>, Vec<f64>) {
    let n_r = (resolution / 2).max(2);
    let n_theta = resolution;
    let (gx, gw) = gauss_legendre(n_r);
    let half = 0.5 * (outer - inner);
    let mid = 0.5 * (outer + inner);
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut nodes = Vec::with_capacity(n_r * n_theta);
    let mut weights = Vec::with_capacity(n_r * n_theta);
    for (x, wr) in gx.iter().zip(&gw) {
        let r = mid + half * x;
        for j in 0..n_theta {
            let theta = (j as f64 + 0.5) * dtheta;
            nodes.push(Complex64::from_polar(r, theta));
            weights.push(r * wr * half * dtheta);
        }
    }
    (nodes, weights)
}

/// Builds the default rule for a domain; `resolution >= 8`.
pub fn build_quadrature(domain: &Domain, resolution: usize) -> Result<QuadratureRule> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("resolution must be >= 8, got {resolution}")));
    }
    let (nodes, weights) = match domain {
        Domain::Disc { radius } => {
            let (n, w) = polar_rule(0.0, *radius, resolution);
            (n.into_iter().map(Point::C1).collect(), w)
        }
        Domain::Annulus { inner_radius, outer_radius } => {
            let (n, w) = polar_rule(*inner_radius, *outer_radius, resolution);
            (n.into_iter().map(Point::C1).collect(), w)
        }
        Domain::Bidisc { radius1, radius2 } => {
            let (n1, w1) = polar_rule(0.0, *radius1, resolution);
            let (n2, w2) = polar_rule(0.0, *radius2, resolution);
            let mut nodes = Vec::with_capacity(n1.len() * n2.len());
            let mut weights = Vec::with_capacity(n1.len() * n2.len());
            for (z, wz) in n1.iter().zip(&w1) {
                for (w, ww) in n2.iter().zip(&w2) {
                    nodes.push(Point::C2(*z, *w));
                    weights.push(wz * ww);
                }
            }
            (nodes, weights)
        }
        Domain::Lens { .. } => {
            ensure_connected(domain, resolution)?;
            let (n, w) = subdivided_cartesian(domain, resolution)?;
            (n.into_iter().map(Point::C1).collect(), w)
        }
    };
    Ok(QuadratureRule { domain: domain.clone(), nodes, weights, resolution, lattice: None })
}

fn ensure_connected(domain: &Domain, resolution: usize) -> Result<()> {
    if flood_fill_connected(domain, resolution)? {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "{} is not connected at resolution {resolution}",
            domain.label()
        )))
    }
}

fn subdivided_cartesian(domain: &Domain, resolution: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let grid = CellGrid::over(domain, resolution)?;
    let h = grid.h;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.center(i, j);
            let probes = [
                c,
                c + Complex64::new(-0.5 * h, -0.5 * h),
                c + Complex64::new(0.5 * h, -0.5 * h),
                c + Complex64::new(-0.5 * h, 0.5 * h),
                c + Complex64::new(0.5 * h, 0.5 * h),
            ];
            let hits = probes.iter().filter(|&&p| domain.contains_planar(p)).count();
            if hits == probes.len() {
                nodes.push(c);
                weights.push(h * h);
            } else if hits > 0 {
                for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                    let s = c + Complex64::new(dx * h, dy * h);
                    if domain.contains_planar(s) {
                        nodes.push(s);
                        weights.push(0.25 * h * h);
                    }
                }
            }
        }
    }
    Ok((nodes, weights))
}

/// Clipped Cartesian lattice over a planar domain: every cell of side
/// `max(width, height) / resolution` whose center is inside becomes a node
/// of weight `h^2`.
pub fn build_lattice_quadrature(domain: &Domain, resolution: usize) -> Result<QuadratureRule> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("resolution must be >= 8, got {resolution}")));
    }
    if domain.dimension() != 1 {
        return Err(Error::InvalidInput("lattice rules exist only for planar domains".into()));
    }
    if matches!(domain, Domain::Lens { .. }) {
        ensure_connected(domain, resolution)?;
    }
    let grid = CellGrid::over(domain, resolution)?;
    let mut nodes = Vec::new();
    let mut indices = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.center(i, j);
            if domain.contains_planar(c) {
                nodes.push(Point::C1(c));
                indices.push((i as i32, j as i32));
            }
        }
    }
    let weights = vec![grid.h * grid.h; nodes.len()];
    let origin = grid.center(0, 0);
    Ok(QuadratureRule {
        domain: domain.clone(),
        nodes,
        weights,
        resolution,
        lattice: Some(Lattice::new(origin, grid.h, indices)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        // exact up to degree 11
        for deg in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert_relative_eq!(q, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn disc_area() {
        let rule = build_quadrature(&Domain::unit_disc(), 64).unwrap();
        assert!((rule.total_weight() - PI).abs() / PI < 0.02);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn bidisc_volume() {
        let rule = build_quadrature(&Domain::bidisc(1.0, 1.0).unwrap(), 32).unwrap();
        assert!((rule.total_weight() - PI * PI).abs() / (PI * PI) < 0.04);
    }

    #[test]
    fn annulus_area_and_membership() {
        let d = Domain::annulus(0.5, 1.0).unwrap();
        let rule = build_quadrature(&d, 32).unwrap();
        assert_relative_eq!(rule.total_weight(), 0.75 * PI, max_relative = 1e-12);
        assert!(rule.nodes.iter().all(|p| d.contains(p).unwrap()));
    }

    #[test]
    fn refinement_is_monotone() {
        for domain in [Domain::unit_disc(), Domain::bidisc(1.0, 1.0).unwrap()] {
            let exact = domain.measure().unwrap();
            let mut last = f64::INFINITY;
            for res in [8, 16, 32] {
                let err = (build_quadrature(&domain, res).unwrap().total_weight() - exact).abs();
                // both rules are exact on constants, so only round-off remains
                assert!(err <= last + 1e-11 * exact, "{domain}: {err} after {last}");
                last = err;
            }
        }
    }

    #[test]
    fn lens_nodes_satisfy_both_predicates() {
        let center = Complex64::new(1.0, 0.0);
        let lens = Domain::lens(Domain::unit_disc(), center, 0.5).unwrap();
        let rule = build_quadrature(&lens, 64).unwrap();
        for p in &rule.nodes {
            assert!(p.z().norm() < 1.0);
            assert!((p.z() - center).norm() < 0.5);
        }
    }

    #[test]
    fn lattice_neighbors() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 16).unwrap();
        let lattice = rule.lattice.as_ref().unwrap();
        assert_relative_eq!(lattice.spacing, 0.125);
        let k = lattice.node_at(8, 8).unwrap();
        assert_relative_eq!(rule.nodes[k].z().re, 0.0625);
        assert!(lattice.node_at(0, 0).is_none());
        assert!(rule.weights.iter().all(|&w| w == 0.015625));
    }

    #[test]
    fn low_resolution_rejected() {
        assert!(build_quadrature(&Domain::unit_disc(), 4).is_err());
        assert!(build_lattice_quadrature(&Domain::unit_disc(), 7).is_err());
    }
}

//! Discrete `dbar = (d/dx + i d/dy) / 2` on lattice rules: centered
//! differences where both neighbors exist, one-sided at the boundary ring.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone)]
pub struct DbarStencil {
    spacing: f64,
    /// `[x-, x+, y-, y+]` neighbor node indices.
    neighbors: Vec<[Option<usize>; 4]>,
}

impl DbarStencil {
    pub fn new(rule: &QuadratureRule) -> Result<Self> {
        let lattice = rule
            .lattice
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("the dbar stencil needs a lattice rule".into()))?;
        let neighbors = lattice
            .indices
            .iter()
            .map(|&(i, j)| {
                [
                    lattice.node_at(i - 1, j),
                    lattice.node_at(i + 1, j),
                    lattice.node_at(i, j - 1),
                    lattice.node_at(i, j + 1),
                ]
            })
            .collect();
        Ok(DbarStencil { spacing: lattice.spacing, neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    fn diff(&self, u: &[Complex64], k: usize, minus: Option<usize>, plus: Option<usize>) -> Complex64 {
        let h = self.spacing;
        match (minus, plus) {
            (Some(m), Some(p)) => (u[p] - u[m]) / (2.0 * h),
            (None, Some(p)) => (u[p] - u[k]) / h,
            (Some(m), None) => (u[k] - u[m]) / h,
            (None, None) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(u.len(), self.len());
        self.neighbors
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let dx = self.diff(u, k, n[0], n[1]);
                let dy = self.diff(u, k, n[2], n[3]);
                0.5 * (dx + Complex64::i() * dy)
            })
            .collect()
    }

    /// Nodes whose four neighbors all exist (centered stencil).
    pub fn interior_mask(&self) -> Vec<bool> {
        self.neighbors.iter().map(|n| n.iter().all(Option::is_some)).collect()
    }

    /// Nodes whose four neighbors all satisfy `keep`.
    pub fn interior_within(&self, keep: &[bool]) -> Vec<bool> {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(k, n)| keep[k] && n.iter().all(|x| x.is_some_and(|m| keep[m])))
            .collect()
    }
}

/// Nodes at distance at least `margin` from the domain boundary.
pub fn compact_interior(rule: &QuadratureRule, margin: f64) -> Vec<bool> {
    rule.nodes
        .iter()
        .map(|p| rule.domain.distance_to_boundary(p.z()) >= margin)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::quadrature::build_lattice_quadrature;

    #[test]
    fn exact_on_linear_functions() {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), 32).unwrap();
        let st = DbarStencil::new(&rule).unwrap();
        let nodes = rule.planar_nodes();
        let conj: Vec<Complex64> = nodes.iter().map(|z| z.conj() * 2.0 + z * 3.0).collect();
        for v in st.apply(&conj) {
            assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn centered_stencil_is_second_order() {
        let d = Domain::unit_disc();
        let err = |res| {
            let rule = build_lattice_quadrature(&d, res).unwrap();
            let st = DbarStencil::new(&rule).unwrap();
            let mask = st.interior_mask();
            // |z|^4; its dbar is 2 |z|^2 z
            let u: Vec<Complex64> = rule.planar_nodes().iter().map(|z| Complex64::from(z.norm_sqr().powi(2))).collect();
            let exact: Vec<Complex64> = rule.planar_nodes().iter().map(|z| z * z.norm_sqr() * 2.0).collect();
            let diff: Vec<Complex64> = st.apply(&u).iter().zip(&exact).map(|(a, b)| a - b).collect();
            rule.masked_norm(&diff, &mask)
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 0.3 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn requires_lattice() {
        let rule = crate::quadrature::build_quadrature(&Domain::unit_disc(), 16).unwrap();
        assert!(DbarStencil::new(&rule).is_err());
    }
}

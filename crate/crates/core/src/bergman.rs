//! Numerically orthonormal Bergman-space bases built from monomials.
//!
//! Monomial Gram matrices become severely ill-conditioned as the degree
//! grows, so orthonormalization goes through a Hermitian eigendecomposition
//! and drops directions whose eigenvalue falls below a relative threshold
//! instead of inverting them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::domain::{Domain, Point};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, Arnoldi, CMatrix};
use crate::quadrature::QuadratureRule;

/// Default relative eigenvalue threshold for [`orthonormalize`].
pub const DEFAULT_THRESHOLD: f64 = 1e-10;

/// Degree truncation of a monomial basis.
///
/// `Single(n)` is the planar cap (exponents `0..=n`, or `-n..=n` on an
/// annulus); `PerVariable(a, b)` caps each exponent in C^2 separately and
/// `Total(n)` caps the total degree in C^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DegreeCap {
    Single(u32),
    PerVariable(u32, u32),
    Total(u32),
}

impl DegreeCap {
    /// Strict partial order used to validate truncation families.
    pub fn precedes(&self, other: &DegreeCap) -> bool {
        match (*self, *other) {
            (DegreeCap::Single(a), DegreeCap::Single(b)) => a < b,
            (DegreeCap::Total(a), DegreeCap::Total(b)) => a < b,
            (DegreeCap::PerVariable(a1, a2), DegreeCap::PerVariable(b1, b2)) => {
                a1 <= b1 && a2 <= b2 && (a1, a2) != (b1, b2)
            }
            _ => false,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DegreeCap::Single(_) => 1,
            _ => 2,
        }
    }

    /// Cap raised by `margin` in every variable.
    pub fn widened(&self, margin: u32) -> DegreeCap {
        match *self {
            DegreeCap::Single(n) => DegreeCap::Single(n + margin),
            DegreeCap::PerVariable(a, b) => DegreeCap::PerVariable(a + margin, b + margin),
            DegreeCap::Total(n) => DegreeCap::Total(n + margin),
        }
    }

    fn admits(&self, e: (i32, i32)) -> bool {
        match *self {
            DegreeCap::Single(n) => e.0.unsigned_abs() <= n && e.1 == 0,
            DegreeCap::PerVariable(a, b) => {
                e.0 >= 0 && e.1 >= 0 && e.0 as u32 <= a && e.1 as u32 <= b
            }
            DegreeCap::Total(n) => e.0 >= 0 && e.1 >= 0 && (e.0 + e.1) as u32 <= n,
        }
    }
}

impl fmt::Display for DegreeCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeCap::Single(n) => write!(f, "{n}"),
            DegreeCap::PerVariable(a, b) => write!(f, "{a}x{b}"),
            DegreeCap::Total(n) => write!(f, "t{n}"),
        }
    }
}

impl FromStr for DegreeCap {
    type Err = Error;

    /// `"10"`, `"8x8"` or `"t16"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("cannot parse degree cap {s:?}"));
        if let Some(rest) = s.strip_prefix('t') {
            return rest.parse().map(DegreeCap::Total).map_err(|_| bad());
        }
        if let Some((a, b)) = s.split_once(['x', 'X']) {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Ok(DegreeCap::PerVariable(a, b));
        }
        s.parse().map(DegreeCap::Single).map_err(|_| bad())
    }
}

impl Serialize for DegreeCap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Monomials `((z - c1)/s1)^a ((w - c2)/s2)^b` in graded order.
///
/// On lenses the raw monomials are replaced by polynomials of the same
/// graded degrees that are discretely orthonormal on the rule they were
/// built from (see [`MonomialBasis::for_rule`]); they span the same spaces
/// but keep the Gram matrix near the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub cap: DegreeCap,
    pub exponents: Vec<(i32, i32)>,
    pub center: (Complex64, Complex64),
    pub scale: (f64, f64),
    pub recurrence: Option<Arc<Recurrence>>,
}

/// Arnoldi recurrence `x q_k = sum_{j <= k+1} h[k][j] q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub q0: f64,
    pub h: Vec<Vec<Complex64>>,
}

impl MonomialBasis {
    /// Basis adapted to a domain: discs and bidiscs are scaled to the unit
    /// polydisc, annuli get Laurent exponents `-n..=n` scaled by the
    /// geometric mean radius, lenses are centered on their bounding box.
    pub fn for_domain(domain: &Domain, cap: DegreeCap) -> Result<Self> {
        if cap.dimension() != domain.dimension() {
            return Err(Error::InvalidInput(format!(
                "degree cap {cap} does not match a domain of dimension {}",
                domain.dimension()
            )));
        }
        let zero = Complex64::new(0.0, 0.0);
        let (laurent, center, scale) = match domain {
            Domain::Disc { radius } => (false, (zero, zero), (*radius, 1.0)),
            Domain::Annulus { inner_radius, outer_radius } => {
                (true, (zero, zero), ((inner_radius * outer_radius).sqrt(), 1.0))
            }
            Domain::Lens { .. } => {
                let b = domain.planar_bounding_box()?;
                let c = Complex64::new(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
                (false, (c, zero), (0.5 * b.width().hypot(b.height()), 1.0))
            }
            Domain::Bidisc { radius1, radius2 } => (false, (zero, zero), (*radius1, *radius2)),
        };
        Ok(Self::with_frame(cap, laurent, center, scale))
    }

    /// Basis with an explicit center and scale. `laurent` adds negative
    /// exponents for planar caps.
    pub fn with_frame(
        cap: DegreeCap,
        laurent: bool,
        center: (Complex64, Complex64),
        scale: (f64, f64),
    ) -> Self {
        let mut exponents = match cap {
            DegreeCap::Single(n) => {
                let n = n as i32;
                let mut e: Vec<(i32, i32)> = (0..=n).map(|a| (a, 0)).collect();
                if laurent {
                    e.extend((1..=n).map(|a| (-a, 0)));
                }
                e
            }
            DegreeCap::PerVariable(a, b) => (0..=a as i32)
                .flat_map(|i| (0..=b as i32).map(move |j| (i, j)))
                .collect(),
            DegreeCap::Total(n) => (0..=n as i32)
                .flat_map(|i| (0..=n as i32 - i).map(move |j| (i, j)))
                .collect(),
        };
        // graded order: total (absolute) degree, then negative before
        // positive, then larger first exponent first
        exponents.sort_by_key(|&(a, b)| (a.abs() + b, a >= 0, -a));
        MonomialBasis { cap, exponents, center, scale, recurrence: None }
    }

    /// Basis for `rule`: [`Self::for_domain`], except that on lenses the
    /// monomials are orthonormalized against the rule by Arnoldi iteration.
    pub fn for_rule(rule: &QuadratureRule, cap: DegreeCap) -> Result<Self> {
        let mut basis = Self::for_domain(&rule.domain, cap)?;
        let (Domain::Lens { .. }, DegreeCap::Single(n)) = (&rule.domain, cap) else {
            return Ok(basis);
        };
        let x: Vec<Complex64> = rule.nodes.iter().map(|p| (p.z() - basis.center.0) / basis.scale.0).collect();
        let arnoldi = Arnoldi::new(&x, &rule.weights, n as usize, 1e-12)?;
        if arnoldi.cols != n as usize + 1 {
            return Err(Error::Numerical(format!(
                "only {} independent polynomials up to degree {n} on {} nodes",
                arnoldi.cols,
                rule.len()
            )));
        }
        basis.recurrence = Some(Arc::new(Recurrence { q0: arnoldi.q0, h: arnoldi.h }));
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.cap.dimension()
    }

    /// Positions of the exponents admitted by a smaller cap.
    pub fn indices_within(&self, cap: DegreeCap) -> Vec<usize> {
        self.exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| cap.admits(e))
            .map(|(k, _)| k)
            .collect()
    }

    /// Values of all monomials at one point.
    pub fn eval(&self, point: &Point) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        self.eval_into(point, &mut out);
        out
    }

    fn eval_into(&self, point: &Point, out: &mut [Complex64]) {
        let u = (point.z() - self.center.0) / self.scale.0;
        if let Some(rec) = &self.recurrence {
            // exponents are (0, 0), (1, 0), ... so slot k holds q_k
            out[0] = Complex64::new(rec.q0, 0.0);
            for k in 0..out.len() - 1 {
                let col = &rec.h[k];
                let mut v = u * out[k];
                for j in 0..=k {
                    v -= col[j] * out[j];
                }
                out[k + 1] = v / col[k + 1];
            }
            return;
        }
        let v = (point.w() - self.center.1) / self.scale.1;
        for (slot, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            let mut val = u.powi(a);
            if b != 0 {
                val *= v.powi(b);
            }
            *slot = val;
        }
    }

    /// Row-per-node sample matrix.
    pub fn sample(&self, rule: &QuadratureRule) -> NodeMatrix {
        let cols = self.len();
        let mut data = vec![Complex64::new(0.0, 0.0); rule.len() * cols];
        for (row, p) in data.chunks_mut(cols.max(1)).zip(&rule.nodes) {
            self.eval_into(p, row);
        }
        NodeMatrix { rows: rule.len(), cols, data }
    }
}

/// Samples of several functions at quadrature nodes, stored row-major with
/// one row per node.
#[derive(Debug, Clone)]
pub struct NodeMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl NodeMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        NodeMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = NodeMatrix::zeros(rows, cols);
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, v) in col.iter().enumerate() {
                m.data[r * cols + c] = *v;
            }
        }
        m
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    /// Keeps the listed columns in order.
    pub fn select_columns(&self, keep: &[usize]) -> NodeMatrix {
        let mut out = NodeMatrix::zeros(self.rows, keep.len());
        for r in 0..self.rows {
            let src = self.row(r);
            for (dst, &k) in keep.iter().enumerate() {
                out.data[r * keep.len() + dst] = src[k];
            }
        }
        out
    }

    /// `self * coeff` where `coeff` is `cols x m`.
    pub fn mul(&self, coeff: &CMatrix) -> NodeMatrix {
        assert_eq!(coeff.nrows(), self.cols);
        let m = coeff.ncols();
        let mut out = NodeMatrix::zeros(self.rows, m);
        for r in 0..self.rows {
            let src = self.row(r);
            let dst = &mut out.data[r * m..(r + 1) * m];
            for (k, s) in src.iter().enumerate() {
                if *s == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (j, d) in dst.iter_mut().enumerate() {
                    *d += s * coeff[(k, j)];
                }
            }
        }
        out
    }

    /// Multiplies row `r` by `factor[r]`.
    pub fn scale_rows(&mut self, factor: &[Complex64]) {
        let cols = self.cols;
        for (row, f) in self.data.chunks_mut(cols.max(1)).zip(factor) {
            for v in row {
                *v *= f;
            }
        }
    }

    /// `cross(a, b)[k][n] = sum_j w_j conj(a_jk) b_jn`.
    pub fn cross(a: &NodeMatrix, b: &NodeMatrix, weights: &[f64]) -> CMatrix {
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows, weights.len());
        let (ka, kb) = (a.cols, b.cols);
        let chunk = 4096;
        let partials = crate::par::map_collect(a.rows.div_ceil(chunk), |c| {
            let mut acc = vec![Complex64::new(0.0, 0.0); ka * kb];
            let end = ((c + 1) * chunk).min(a.rows);
            for r in c * chunk..end {
                let w = weights[r];
                if w == 0.0 {
                    continue;
                }
                let ra = a.row(r);
                let rb = b.row(r);
                for (k, x) in ra.iter().enumerate() {
                    let cx = x.conj() * w;
                    let dst = &mut acc[k * kb..(k + 1) * kb];
                    for (d, y) in dst.iter_mut().zip(rb) {
                        *d += cx * y;
                    }
                }
            }
            acc
        });
        let mut out = CMatrix::zeros(ka, kb);
        for p in partials {
            for k in 0..ka {
                for n in 0..kb {
                    out[(k, n)] += p[k * kb + n];
                }
            }
        }
        out
    }

    /// Hermitian Gram `G[m][n] = sum_j w_j conj(a_jm) a_jn`, assembled on
    /// the upper triangle and mirrored.
    pub fn gram(a: &NodeMatrix, weights: &[f64]) -> CMatrix {
        assert_eq!(a.rows, weights.len());
        let k = a.cols;
        let chunk = 4096;
        let partials = crate::par::map_collect(a.rows.div_ceil(chunk), |c| {
            let mut acc = vec![Complex64::new(0.0, 0.0); k * k];
            let end = ((c + 1) * chunk).min(a.rows);
            for r in c * chunk..end {
                let w = weights[r];
                if w == 0.0 {
                    continue;
                }
                let row = a.row(r);
                for m in 0..k {
                    let cx = row[m].conj() * w;
                    let dst = &mut acc[m * k..(m + 1) * k];
                    for n in m..k {
                        dst[n] += cx * row[n];
                    }
                }
            }
            acc
        });
        let mut out = CMatrix::zeros(k, k);
        for p in partials {
            for m in 0..k {
                for n in m..k {
                    out[(m, n)] += p[m * k + n];
                }
            }
        }
        for m in 0..k {
            out[(m, m)].im = 0.0;
            for n in m + 1..k {
                out[(n, m)] = out[(m, n)].conj();
            }
        }
        out
    }
}

/// Discrete L^2 Gram matrix of a monomial basis, `G = E^H W E` with `E` the
/// node-by-monomial sample matrix.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: CMatrix,
    pub basis: MonomialBasis,
}

/// Assembles the Gram matrix of `basis` under `rule`.
pub fn gram(basis: &MonomialBasis, rule: &QuadratureRule) -> Result<GramMatrix> {
    if basis.dimension() != rule.dimension() {
        return Err(Error::InvalidInput(format!(
            "basis of dimension {} used with a rule of dimension {}",
            basis.dimension(),
            rule.dimension()
        )));
    }
    let samples = basis.sample(rule);
    Ok(GramMatrix { entries: NodeMatrix::gram(&samples, &rule.weights), basis: basis.clone() })
}

impl GramMatrix {
    /// Principal sub-block for a smaller cap, with the matching sub-basis.
    pub fn restrict(&self, cap: DegreeCap) -> GramMatrix {
        let keep = self.basis.indices_within(cap);
        let entries = DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.entries[(keep[i], keep[j])]);
        let basis = MonomialBasis {
            cap,
            exponents: keep.iter().map(|&k| self.basis.exponents[k]).collect(),
            center: self.basis.center,
            scale: self.basis.scale,
            recurrence: self.basis.recurrence.clone(),
        };
        GramMatrix { entries, basis }
    }
}

/// Orthonormal basis `e_k = sum_m Q[m][k] phi_m` of the span of the
/// retained eigendirections, with `Q^H G Q = I`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub monomials: MonomialBasis,
    pub transform: CMatrix,
    pub retained_rank: usize,
    pub threshold: f64,
    pub eigen_max: f64,
    pub eigen_min: f64,
}

/// Metadata written to run records.
#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub degree_cap: DegreeCap,
    pub monomials: usize,
    pub retained_rank: usize,
    pub threshold: f64,
    pub eigen_max: f64,
    pub eigen_min: f64,
}

/// Eigendecomposition-based orthonormalization; directions with eigenvalue
/// below `relative_threshold * lambda_max` are discarded.
pub fn orthonormalize(gram: &GramMatrix, relative_threshold: f64) -> Result<OrthonormalBasis> {
    if !(1e-14..=1e-4).contains(&relative_threshold) {
        return Err(Error::InvalidInput(format!(
            "relative threshold must lie in [1e-14, 1e-4], got {relative_threshold:e}"
        )));
    }
    let eig = hermitian_eigen(&gram.entries)?;
    let eigen_max = eig.values.first().copied().unwrap_or(0.0);
    let eigen_min = eig.values.last().copied().unwrap_or(0.0);
    if eigen_max <= 0.0 || !eigen_max.is_finite() {
        return Err(Error::Numerical(
            "Gram matrix has no positive eigenvalue: quadrature and basis are degenerate".into(),
        ));
    }
    let cut = relative_threshold * eigen_max;
    let retained = eig.values.iter().take_while(|&&v| v >= cut).count();
    let n = gram.entries.nrows();
    let mut transform = CMatrix::zeros(n, retained);
    for k in 0..retained {
        let s = Complex64::new(eig.values[k].sqrt().recip(), 0.0);
        transform.set_column(k, &(eig.vectors.column(k) * s));
    }
    Ok(OrthonormalBasis {
        monomials: gram.basis.clone(),
        transform,
        retained_rank: retained,
        threshold: relative_threshold,
        eigen_max,
        eigen_min,
    })
}

impl OrthonormalBasis {
    /// Values `e_k(point)` for all retained `k`.
    pub fn eval(&self, point: &Point) -> Vec<Complex64> {
        let phi = self.monomials.eval(point);
        (0..self.retained_rank)
            .map(|k| phi.iter().enumerate().map(|(m, v)| v * self.transform[(m, k)]).sum())
            .collect()
    }

    /// Row-per-node samples of the orthonormal functions.
    pub fn sample(&self, rule: &QuadratureRule) -> NodeMatrix {
        self.monomials.sample(rule).mul(&self.transform)
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            degree_cap: self.monomials.cap,
            monomials: self.monomials.len(),
            retained_rank: self.retained_rank,
            threshold: self.threshold,
            eigen_max: self.eigen_max,
            eigen_min: self.eigen_min,
        }
    }
}

/// Truncated Bergman kernel `K_N(z, w) = sum_k e_k(z) conj(e_k(w))`.
pub fn bergman_kernel(basis: &OrthonormalBasis, z: &Point, w: &Point) -> Complex64 {
    let ez = basis.eval(z);
    let ew = basis.eval(w);
    ez.iter().zip(&ew).map(|(a, b)| a * b.conj()).sum()
}

/// Discrete Bergman projection with the basis sampled once on the rule.
#[derive(Debug, Clone)]
pub struct Projector {
    pub values: NodeMatrix,
    pub weights: Vec<f64>,
}

impl Projector {
    pub fn new(basis: &OrthonormalBasis, rule: &QuadratureRule) -> Self {
        Projector { values: basis.sample(rule), weights: rule.weights.clone() }
    }

    /// `c_k = sum_j w_j f_j conj(e_k(node_j))`.
    pub fn coefficients(&self, samples: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.values.rows);
        let f = NodeMatrix { rows: samples.len(), cols: 1, data: samples.to_vec() };
        let c = NodeMatrix::cross(&self.values, &f, &self.weights);
        c.column(0).iter().copied().collect()
    }

    /// `sum_k c_k e_k` at the nodes.
    pub fn reconstruct(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        let c = CMatrix::from_column_slice(coefficients.len(), 1, coefficients);
        self.values.mul(&c).data
    }

    pub fn apply(&self, samples: &[Complex64]) -> Vec<Complex64> {
        self.reconstruct(&self.coefficients(samples))
    }
}

/// Projection coefficients of node samples onto the orthonormal basis.
pub fn project(basis: &OrthonormalBasis, rule: &QuadratureRule, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    if samples.len() != rule.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples for a rule with {} nodes",
            samples.len(),
            rule.len()
        )));
    }
    Ok(Projector::new(basis, rule).coefficients(samples))
}

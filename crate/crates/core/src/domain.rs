//! Bounded model domains in one and two complex variables.

use std::collections::VecDeque;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "p lies on the boundary of the base domain", relative to the
/// base diameter.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// A point of C^1 or C^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Point {
    C1(Complex64),
    C2(Complex64, Complex64),
}

impl Point {
    pub fn dimension(&self) -> usize {
        match self {
            Point::C1(_) => 1,
            Point::C2(..) => 2,
        }
    }

    /// First coordinate.
    pub fn z(&self) -> Complex64 {
        match *self {
            Point::C1(z) | Point::C2(z, _) => z,
        }
    }

    /// Second coordinate, zero for planar points.
    pub fn w(&self) -> Complex64 {
        match *self {
            Point::C1(_) => Complex64::new(0.0, 0.0),
            Point::C2(_, w) => w,
        }
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point::C1(z)
    }
}

/// Axis-aligned box `[x0, x1] x [y0, y1]` in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl PlanarBox {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn intersect(&self, other: &PlanarBox) -> PlanarBox {
        PlanarBox {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        }
    }
}

/// Model domains. Discs and annuli are centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Disc {
        radius: f64,
    },
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
    },
    /// `base ∩ B(center, radius)` with `center` on the boundary of `base`.
    Lens {
        base: Box<Domain>,
        center: Complex64,
        radius: f64,
    },
    Bidisc {
        radius1: f64,
        radius2: f64,
    },
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be a positive real, got {value}")))
    }
}

impl Domain {
    pub fn disc(radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Ok(Domain::Disc { radius })
    }

    pub fn unit_disc() -> Self {
        Domain::Disc { radius: 1.0 }
    }

    pub fn annulus(inner_radius: f64, outer_radius: f64) -> Result<Self> {
        positive("inner_radius", inner_radius)?;
        positive("outer_radius", outer_radius)?;
        if inner_radius >= outer_radius {
            return Err(Error::InvalidInput(format!(
                "annulus needs inner_radius < outer_radius, got {inner_radius} >= {outer_radius}"
            )));
        }
        Ok(Domain::Annulus { inner_radius, outer_radius })
    }

    pub fn bidisc(radius1: f64, radius2: f64) -> Result<Self> {
        positive("radius1", radius1)?;
        positive("radius2", radius2)?;
        Ok(Domain::Bidisc { radius1, radius2 })
    }

    /// `base ∩ B(center, radius)`. The base must be planar and `center` must
    /// sit on its boundary.
    pub fn lens(base: Domain, center: Complex64, radius: f64) -> Result<Self> {
        positive("lens radius", radius)?;
        if base.dimension() != 1 || matches!(base, Domain::Lens { .. }) {
            return Err(Error::InvalidInput("lens base must be a disc or an annulus".into()));
        }
        let gap = base.distance_to_boundary(center);
        if gap > BOUNDARY_TOLERANCE * base.diameter() {
            return Err(Error::Geometry(format!(
                "lens center {center} is {gap:.3e} away from the base boundary"
            )));
        }
        Ok(Domain::Lens { base: Box::new(base), center, radius })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Bidisc { .. } => 2,
            _ => 1,
        }
    }

    /// Short label used in tables and file names.
    pub fn label(&self) -> String {
        match self {
            Domain::Disc { radius } => format!("disc(r={radius})"),
            Domain::Annulus { inner_radius, outer_radius } => {
                format!("annulus({inner_radius},{outer_radius})")
            }
            Domain::Lens { base, center, radius } => {
                format!("lens[{} ∩ B({},{radius})]", base.label(), fmt_complex(*center))
            }
            Domain::Bidisc { radius1, radius2 } => format!("bidisc({radius1},{radius2})"),
        }
    }

    /// Membership in the open region. Errors on a dimension mismatch.
    pub fn contains(&self, point: &Point) -> Result<bool> {
        if point.dimension() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "point of dimension {} tested against a domain of dimension {}",
                point.dimension(),
                self.dimension()
            )));
        }
        Ok(match (self, point) {
            (Domain::Bidisc { radius1, radius2 }, Point::C2(z, w)) => {
                z.norm() < *radius1 && w.norm() < *radius2
            }
            (_, Point::C1(z)) => self.contains_planar(*z),
            _ => unreachable!("dimension checked above"),
        })
    }

    /// Membership for planar domains; always false for the bidisc.
    pub fn contains_planar(&self, z: Complex64) -> bool {
        match self {
            Domain::Disc { radius } => z.norm() < *radius,
            Domain::Annulus { inner_radius, outer_radius } => {
                let m = z.norm();
                m > *inner_radius && m < *outer_radius
            }
            Domain::Lens { base, center, radius } => {
                base.contains_planar(z) && (z - center).norm() < *radius
            }
            Domain::Bidisc { .. } => false,
        }
    }

    /// Distance from a planar point to the boundary of the region.
    pub fn distance_to_boundary(&self, z: Complex64) -> f64 {
        match self {
            Domain::Disc { radius } => (z.norm() - radius).abs(),
            Domain::Annulus { inner_radius, outer_radius } => {
                let m = z.norm();
                (m - inner_radius).abs().min((m - outer_radius).abs())
            }
            Domain::Lens { base, center, radius } => {
                let to_ball = ((z - center).norm() - radius).abs();
                let to_base = base.distance_to_boundary(z);
                match (base.contains_planar(z), (z - center).norm() < *radius) {
                    (true, true) => to_ball.min(to_base),
                    (false, true) => to_base,
                    (true, false) => to_ball,
                    (false, false) => to_ball.max(to_base),
                }
            }
            Domain::Bidisc { .. } => f64::NAN,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disc { radius } => 2.0 * radius,
            Domain::Annulus { outer_radius, .. } => 2.0 * outer_radius,
            Domain::Lens { base, radius, .. } => base.diameter().min(2.0 * radius),
            Domain::Bidisc { radius1, radius2 } => 2.0 * radius1.hypot(*radius2),
        }
    }

    /// Bounding box of a planar domain.
    pub fn planar_bounding_box(&self) -> Result<PlanarBox> {
        match self {
            Domain::Disc { radius: r } | Domain::Annulus { outer_radius: r, .. } => {
                Ok(PlanarBox { x0: -r, x1: *r, y0: -r, y1: *r })
            }
            Domain::Lens { base, center, radius } => {
                let ball = PlanarBox {
                    x0: center.re - radius,
                    x1: center.re + radius,
                    y0: center.im - radius,
                    y1: center.im + radius,
                };
                Ok(base.planar_bounding_box()?.intersect(&ball))
            }
            Domain::Bidisc { .. } => {
                Err(Error::InvalidInput("the bidisc has no planar bounding box".into()))
            }
        }
    }

    /// Lebesgue measure when it is known in closed form.
    pub fn measure(&self) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            Domain::Disc { radius } => Some(PI * radius * radius),
            Domain::Annulus { inner_radius, outer_radius } => {
                Some(PI * (outer_radius * outer_radius - inner_radius * inner_radius))
            }
            Domain::Bidisc { radius1, radius2 } => {
                Some(PI * PI * radius1 * radius1 * radius2 * radius2)
            }
            Domain::Lens { .. } => None,
        }
    }

    /// The factor discs of the bidisc.
    pub fn factors(&self) -> Option<(Domain, Domain)> {
        match self {
            Domain::Bidisc { radius1, radius2 } => {
                Some((Domain::Disc { radius: *radius1 }, Domain::Disc { radius: *radius2 }))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// Cell grid over a planar domain: cell `(i, j)` has center
/// `x0 + (i + 1/2) h, y0 + (j + 1/2) h`.
#[derive(Debug, Clone)]
pub(crate) struct CellGrid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CellGrid {
    /// Square cells of side `max(width, height) / resolution` covering the
    /// bounding box.
    pub fn over(domain: &Domain, resolution: usize) -> Result<Self> {
        let bbox = domain.planar_bounding_box()?;
        let h = bbox.width().max(bbox.height()) / resolution as f64;
        let nx = (bbox.width() / h).round().max(1.0) as usize;
        let ny = (bbox.height() / h).round().max(1.0) as usize;
        Ok(CellGrid { x0: bbox.x0, y0: bbox.y0, h, nx, ny })
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.x0 + (i as f64 + 0.5) * self.h,
            self.y0 + (j as f64 + 0.5) * self.h,
        )
    }
}

/// True iff the grid cells whose centers lie in the domain form a single
/// 4-connected component. Product domains are connected iff both factors are.
pub fn flood_fill_connected(domain: &Domain, resolution: usize) -> Result<bool> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("resolution must be >= 8, got {resolution}")));
    }
    if let Some((a, b)) = domain.factors() {
        return Ok(flood_fill_connected(&a, resolution)? && flood_fill_connected(&b, resolution)?);
    }
    let grid = CellGrid::over(domain, resolution)?;
    let inside: Vec<bool> = (0..grid.nx * grid.ny)
        .map(|idx| domain.contains_planar(grid.center(idx % grid.nx, idx / grid.nx)))
        .collect();
    let total = inside.iter().filter(|&&b| b).count();
    let Some(start) = inside.iter().position(|&b| b) else {
        return Ok(false);
    };
    let mut seen = vec![false; inside.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 0;
    while let Some(idx) = queue.pop_front() {
        reached += 1;
        let (i, j) = (idx % grid.nx, idx / grid.nx);
        let mut visit = |ni: usize, nj: usize| {
            let n = nj * grid.nx + ni;
            if inside[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < grid.nx {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < grid.ny {
            visit(i, j + 1);
        }
    }
    Ok(reached == total)
}

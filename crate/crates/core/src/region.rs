//! DoF pairs and convex, downward-closed DoF regions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// An achievable pair of degrees of freedom, `(A -> B, B -> A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofPoint {
    pub d_ab: f64,
    pub d_ba: f64,
}

impl DofPoint {
    pub fn new(d_ab: f64, d_ba: f64) -> Result<Self> {
        if !(d_ab.is_finite() && d_ab >= 0.0 && d_ba.is_finite() && d_ba >= 0.0) {
            return Err(invalid("dof", format!("({d_ab}, {d_ba}) must be finite and >= 0")));
        }
        Ok(Self { d_ab, d_ba })
    }

    pub const ORIGIN: DofPoint = DofPoint { d_ab: 0.0, d_ba: 0.0 };

    pub fn sum(&self) -> f64 {
        self.d_ab + self.d_ba
    }

    pub(crate) fn unchecked(d_ab: f64, d_ba: f64) -> Self {
        debug_assert!(d_ab >= 0.0 && d_ba >= 0.0, "({d_ab}, {d_ba})");
        Self { d_ab, d_ba }
    }
}

/// Convex polygon in the first quadrant, closed against both axes.
///
/// Vertices run counter-clockwise starting at the origin. A region may be
/// degenerate: a single vertex (only the origin is achievable) or a segment
/// along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct DofRegion {
    vertices: Vec<DofPoint>,
}

/// Coordinates closer than this are the same vertex.
pub const VERTEX_EPS: f64 = 1e-12;

/// Default tolerance for region comparisons.
pub const REGION_TOL: f64 = 1e-9;

fn cross(o: DofPoint, a: DofPoint, b: DofPoint) -> f64 {
    (a.d_ab - o.d_ab) * (b.d_ba - o.d_ba) - (a.d_ba - o.d_ba) * (b.d_ab - o.d_ab)
}

impl DofRegion {
    /// Region that contains only the origin.
    pub fn origin_only() -> Self {
        Self { vertices: vec![DofPoint::ORIGIN] }
    }

    pub(crate) fn from_hull_vertices(vertices: Vec<DofPoint>) -> Self {
        Self { vertices }
    }

    /// Validate an explicit vertex list (for example one read back from disk).
    pub fn from_vertices(vertices: Vec<DofPoint>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(invalid("vertices", "a region needs at least the origin"));
        };
        if first.d_ab != 0.0 || first.d_ba != 0.0 {
            return Err(invalid("vertices", "the first vertex must be the origin"));
        }
        for v in &vertices {
            DofPoint::new(v.d_ab, v.d_ba)?;
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if n > 1 && (a.d_ab - b.d_ab).abs() <= VERTEX_EPS && (a.d_ba - b.d_ba).abs() <= VERTEX_EPS {
                return Err(invalid("vertices", format!("duplicate vertex at index {i}")));
            }
        }
        if n == 2 && vertices[1].d_ab != 0.0 && vertices[1].d_ba != 0.0 {
            return Err(invalid("vertices", "a two-vertex region must lie on an axis"));
        }
        if n >= 3 {
            for i in 0..n {
                let c = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                if c <= 0.0 {
                    return Err(invalid("vertices", format!("not strictly convex counter-clockwise at {i}")));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[DofPoint] {
        &self.vertices
    }

    /// `max_{v in region} w . v`.
    pub fn support(&self, w_ab: f64, w_ba: f64) -> f64 {
        self.vertices.iter().map(|v| w_ab * v.d_ab + w_ba * v.d_ba).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_sum(&self) -> f64 {
        self.support(1.0, 1.0)
    }

    /// Largest `d` with `(d, d)` in the region.
    pub fn max_symmetric(&self) -> f64 {
        let v = &self.vertices;
        if v.len() < 3 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            // outward normal of a CCW edge
            let (nx, ny) = (b.d_ba - a.d_ba, a.d_ab - b.d_ab);
            let offset = nx * a.d_ab + ny * a.d_ba;
            let s = nx + ny;
            if s > 0.0 {
                best = best.min(offset / s);
            }
        }
        if best.is_finite() {
            best.max(0.0)
        } else {
            0.0
        }
    }

    /// Point-in-region test with absolute tolerance `tol`.
    pub fn contains(&self, p: DofPoint, tol: f64) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => dist(v[0], p) <= tol,
            2 => dist_to_segment(p, v[0], v[1]) <= tol,
            n => (0..n).all(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                let len = dist(a, b);
                cross(a, b, p) / len >= -tol
            }),
        }
    }
}

fn dist(a: DofPoint, b: DofPoint) -> f64 {
    (a.d_ab - b.d_ab).hypot(a.d_ba - b.d_ba)
}

fn dist_to_segment(p: DofPoint, a: DofPoint, b: DofPoint) -> f64 {
    let (dx, dy) = (b.d_ab - a.d_ab, b.d_ba - a.d_ba);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.d_ab - a.d_ab) * dx + (p.d_ba - a.d_ba) * dy) / len2).clamp(0.0, 1.0);
    dist(p, DofPoint::unchecked(a.d_ab + t * dx, a.d_ba + t * dy))
}

impl From<DofRegion> for Vec<[f64; 2]> {
    fn from(r: DofRegion) -> Self {
        r.vertices.iter().map(|v| [v.d_ab, v.d_ba]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for DofRegion {
    type Error = crate::error::Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        DofRegion::from_vertices(v.into_iter().map(|[a, b]| DofPoint { d_ab: a, d_ba: b }).collect())
    }
}

pub(crate) fn orient(o: DofPoint, a: DofPoint, b: DofPoint) -> f64 {
    cross(o, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64) -> DofPoint {
        DofPoint::new(a, b).unwrap()
    }

    #[test]
    fn point_validation() {
        assert!(DofPoint::new(-0.1, 0.0).is_err());
        assert!(DofPoint::new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn from_vertices_checks_shape() {
        let tri = DofRegion::from_vertices(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        assert_eq!(tri.max_sum(), 1.0);
        assert!(DofRegion::from_vertices(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)]).is_err());
        assert!(DofRegion::from_vertices(vec![p(1.0, 0.0), p(0.0, 1.0), p(0.0, 0.0)]).is_err());
        assert!(DofRegion::from_vertices(vec![p(0.0, 0.0), p(1.0, 1.0)]).is_err());
        assert!(DofRegion::from_vertices(vec![]).is_err());
    }

    #[test]
    fn symmetric_point_of_triangle_and_square() {
        let tri = DofRegion::from_vertices(vec![p(0.0, 0.0), p(4.0, 0.0), p(0.0, 4.0)]).unwrap();
        assert!((tri.max_symmetric() - 2.0).abs() < 1e-12);
        let sq = DofRegion::from_vertices(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]).unwrap();
        assert!((sq.max_symmetric() - 1.0).abs() < 1e-12);
        assert_eq!(DofRegion::origin_only().max_symmetric(), 0.0);
    }

    #[test]
    fn degenerate_containment() {
        let seg = DofRegion::from_vertices(vec![p(0.0, 0.0), p(2.0, 0.0)]).unwrap();
        assert!(seg.contains(p(1.0, 0.0), 1e-9));
        assert!(!seg.contains(p(1.0, 0.1), 1e-9));
        assert!(DofRegion::origin_only().contains(p(0.0, 0.0), 0.0));
    }
}

//! Brute-force oracles: exhaustive grid max-min search, convex hulls and
//! region predicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::region::{orient, DofPoint, DofRegion, VERTEX_EPS};

/// Grid over the time-sharing fraction `tau` in `[0, 1]` and the power
/// exponent `gamma` in `(0, gamma_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau_steps: usize,
    pub gamma_steps: usize,
    pub gamma_max: f64,
    /// `(tau, gamma)` pairs evaluated in addition to the product grid.
    pub include_exact_points: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn new(tau_steps: usize, gamma_steps: usize, gamma_max: f64) -> Result<Self> {
        let g = Self { tau_steps, gamma_steps, gamma_max, include_exact_points: Vec::new() };
        g.validate()?;
        Ok(g)
    }

    pub fn with_exact_points(mut self, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        self.include_exact_points.extend(points);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_steps < 2 {
            return Err(invalid("tau_steps", "need at least 2 grid points"));
        }
        if self.gamma_steps < 2 {
            return Err(invalid("gamma_steps", "need at least 2 grid points"));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max > 0.0) {
            return Err(invalid("gamma_max", "must be positive"));
        }
        Ok(())
    }

    /// `tau_steps` uniform points covering `[0, 1]`.
    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        let d = (self.tau_steps - 1) as f64;
        (0..self.tau_steps).map(move |i| i as f64 / d)
    }

    /// `gamma_steps` uniform points covering `(0, gamma_max]`.
    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        let d = self.gamma_steps as f64;
        (1..=self.gamma_steps).map(move |i| self.gamma_max * i as f64 / d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub value: f64,
    pub tau: f64,
    pub gamma: f64,
    /// Relay receive-antenna count, `None` when no split was enumerated.
    pub r: Option<usize>,
}

fn better(value: f64, tau: f64, gamma: f64, best: &Option<(f64, f64, f64)>) -> bool {
    match best {
        None => true,
        Some((bv, bt, bg)) => value > *bv || (value == *bv && (gamma, tau) < (*bg, *bt)),
    }
}

/// Exhaustive maximization of `objective(tau, gamma, r)`.
///
/// With `n_r = Some(n)` the split `r` runs over `1..n` (at least one antenna
/// each way); with `None` the objective is called with `r = 0`. Ties go to
/// the smallest `r`, then the smallest `gamma`, then the smallest `tau`.
pub fn grid_maximin<F>(objective: F, n_r: Option<usize>, grid: &GridSpec) -> Result<GridOptimum>
where
    F: Fn(f64, f64, usize) -> f64 + Sync,
{
    grid.validate()?;
    let rs: Vec<usize> = match n_r {
        Some(n) if n < 2 => {
            return Err(Error::EmptyDomain(format!("relay with {n} antenna(s) has no full-duplex split")))
        }
        Some(n) => (1..n).collect(),
        None => vec![0],
    };
    let taus: Vec<f64> = grid.taus().collect();
    let gammas: Vec<f64> = grid.gammas().collect();

    let per_r: Vec<(f64, f64, f64)> = rs
        .par_iter()
        .map(|&r| {
            let mut best: Option<(f64, f64, f64)> = None;
            for &g in &gammas {
                for &t in &taus {
                    let v = objective(t, g, r);
                    if better(v, t, g, &best) {
                        best = Some((v, t, g));
                    }
                }
            }
            for &(t, g) in &grid.include_exact_points {
                let v = objective(t, g, r);
                if better(v, t, g, &best) {
                    best = Some((v, t, g));
                }
            }
            best.expect("grid is non-empty")
        })
        .collect();

    let mut out: Option<GridOptimum> = None;
    for (&r, &(value, tau, gamma)) in rs.iter().zip(&per_r) {
        if out.as_ref().is_none_or(|o| value > o.value) {
            out = Some(GridOptimum { value, tau, gamma, r: n_r.map(|_| r) });
        }
    }
    Ok(out.expect("at least one split"))
}

/// Smallest convex region containing `points`, the origin and the axis
/// projections of every point.
pub fn convex_hull(points: &[DofPoint]) -> DofRegion {
    let mut pts: Vec<DofPoint> = Vec::with_capacity(3 * points.len() + 1);
    pts.push(DofPoint::ORIGIN);
    for p in points {
        pts.push(*p);
        pts.push(DofPoint::unchecked(p.d_ab, 0.0));
        pts.push(DofPoint::unchecked(0.0, p.d_ba));
    }
    pts.sort_by(|a, b| a.d_ab.total_cmp(&b.d_ab).then(a.d_ba.total_cmp(&b.d_ba)));
    pts.dedup_by(|a, b| (a.d_ab - b.d_ab).abs() <= VERTEX_EPS && (a.d_ba - b.d_ba).abs() <= VERTEX_EPS);
    // snap the merged origin back to exact zero
    pts[0] = DofPoint::ORIGIN;
    if pts.len() == 1 {
        return DofRegion::origin_only();
    }

    let mut hull: Vec<DofPoint> = Vec::with_capacity(pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= VERTEX_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= VERTEX_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    DofRegion::from_hull_vertices(hull)
}

pub fn region_contains(region: &DofRegion, p: DofPoint, tol: f64) -> bool {
    region.contains(p, tol)
}

/// `a` is inside `b` and `b` has a vertex outside `a`, both up to `tol`.
pub fn region_strict_subset(a: &DofRegion, b: &DofRegion, tol: f64) -> bool {
    a.vertices().iter().all(|v| b.contains(*v, tol)) && b.vertices().iter().any(|v| !a.contains(*v, tol))
}

/// Largest support-function gap between two regions over `n_dirs` directions
/// spread over the closed first quadrant.
pub fn support_gap(a: &DofRegion, b: &DofRegion, n_dirs: usize) -> f64 {
    let n = n_dirs.max(2);
    (0..n)
        .map(|k| {
            let th = std::f64::consts::FRAC_PI_2 * k as f64 / (n - 1) as f64;
            let (w1, w2) = (th.cos(), th.sin());
            (a.support(w1, w2) - b.support(w1, w2)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: f64, b: f64) -> DofPoint {
        DofPoint::new(a, b).unwrap()
    }

    fn coords(r: &DofRegion) -> Vec<(f64, f64)> {
        r.vertices().iter().map(|v| (v.d_ab, v.d_ba)).collect()
    }

    #[test]
    fn symmetric_maximin() {
        let g = GridSpec::new(2001, 2, 1.0).unwrap();
        let opt = grid_maximin(|t, _, _| (2.0 * t).min(2.0 * (1.0 - t)), None, &g).unwrap();
        assert_eq!(opt.value, 1.0);
        assert_eq!(opt.tau, 0.5);
        assert_eq!(opt.r, None);
    }

    #[test]
    fn relay_hd_objective() {
        // (N_A, N_R, N_B) = (2, 6, 3): min(tau * 2, gamma * (1 - tau) * 3)
        let g = GridSpec::new(2001, 2, 1.0).unwrap();
        let opt = grid_maximin(|t, gm, _| (2.0 * t).min(gm * 3.0 * (1.0 - t)), None, &g).unwrap();
        assert!((opt.value - 1.2).abs() <= 3.0 / 2000.0);
        assert!((opt.tau - 0.6).abs() <= 1.0 / 2000.0);
        assert_eq!(opt.gamma, 1.0);
    }

    #[test]
    fn relay_fd_objective_with_exact_point() {
        // AC FD, (4, 8, 4), lambda = 0.5
        let c = 0.5;
        let obj = |_: f64, g: f64, r: usize| {
            let t = 8 - r;
            let a = (1.0 - g * c) * (4.min(r) as f64);
            let b = g * (t.min(4) as f64);
            a.min(b)
        };
        let g = GridSpec::new(2, 2001, 1.0).unwrap().with_exact_points([(0.0, 1.0 / 1.5)]);
        let opt = grid_maximin(obj, Some(8), &g).unwrap();
        assert!((opt.value - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(opt.r, Some(4));
        assert!((opt.gamma - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_domain() {
        let g = GridSpec::new(2, 2, 1.0).unwrap();
        assert!(matches!(grid_maximin(|_, _, _| 0.0, Some(1), &g), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 5, 1.0).is_err());
        assert!(GridSpec::new(5, 1, 1.0).is_err());
        assert!(GridSpec::new(5, 5, 0.0).is_err());
    }

    #[test]
    fn hull_drops_interior_midpoint() {
        let h = convex_hull(&[p(1.0, 0.0), p(0.0, 1.0), p(0.5, 0.5)]);
        assert_eq!(coords(&h), vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
    }

    #[test]
    fn hull_square() {
        let h = convex_hull(&[p(2.0, 0.0), p(0.0, 2.0), p(2.0, 2.0)]);
        assert_eq!(coords(&h), vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
    }

    #[test]
    fn hull_degenerate_inputs() {
        assert_eq!(coords(&convex_hull(&[p(0.0, 0.0)])), vec![(0.0, 0.0)]);
        assert_eq!(coords(&convex_hull(&[p(3.0, 0.0)])), vec![(0.0, 0.0), (3.0, 0.0)]);
        assert_eq!(coords(&convex_hull(&[p(0.0, 2.0), p(0.0, 1.0)])), vec![(0.0, 0.0), (0.0, 2.0)]);
        let single = convex_hull(&[p(1.0, 2.0)]);
        assert_eq!(coords(&single), vec![(0.0, 0.0), (1.0, 0.0), (1.0, 2.0), (0.0, 2.0)]);
    }

    #[test]
    fn containment_predicates() {
        let tri = convex_hull(&[p(1.0, 0.0), p(0.0, 1.0)]);
        assert!(region_contains(&tri, p(0.2, 0.2), 1e-9));
        assert!(!region_contains(&tri, p(0.6, 0.6), 1e-9));
        let sq = convex_hull(&[p(1.0, 1.0)]);
        assert!(region_strict_subset(&tri, &sq, 1e-9));
        assert!(!region_strict_subset(&sq, &tri, 1e-9));
        assert!(!region_strict_subset(&tri, &tri, 1e-9));
    }

    fn pts() -> impl Strategy<Value = Vec<DofPoint>> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..40)
            .prop_map(|v| v.into_iter().map(|(a, b)| DofPoint::new(a, b).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn hull_is_valid_region(ps in pts()) {
            let h = convex_hull(&ps);
            prop_assert!(DofRegion::from_vertices(h.vertices().to_vec()).is_ok());
            for q in &ps {
                prop_assert!(h.contains(*q, 1e-9));
            }
        }

        #[test]
        fn hull_idempotent(ps in pts()) {
            let h = convex_hull(&ps);
            let hh = convex_hull(h.vertices());
            prop_assert_eq!(h, hh);
        }

        #[test]
        fn hull_monotone(ps in pts(), extra in pts()) {
            let small = convex_hull(&ps);
            let mut all = ps.clone();
            all.extend(extra);
            let big = convex_hull(&all);
            for v in small.vertices() {
                prop_assert!(big.contains(*v, 1e-9));
            }
        }
    }
}

use serde::Serialize;

use super::OperatingPoint;

/// Twice the signed area of (o, a, b); positive for a left turn.
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Points closer than this to a hull segment are treated as collinear.
pub const COLLINEAR_TOL: f64 = 1e-10;

/// Indices of the lower convex hull of `(rate, distortion)` points, sorted
/// by rate and cut at the first point of minimum distortion, so the hull is
/// convex and nonincreasing.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[i].1.total_cmp(&points[j].1))
            .then(i.cmp(&j))
    });
    let mut hull: Vec<usize> = Vec::new();
    for &i in &order {
        let p = points[i];
        if let Some(&last) = hull.last() {
            if points[last].0 == p.0 {
                continue;
            }
        }
        while hull.len() >= 2 {
            let o = points[hull[hull.len() - 2]];
            let a = points[hull[hull.len() - 1]];
            let len = ((p.0 - o.0).powi(2) + (p.1 - o.1).powi(2))
                .sqrt()
                .max(1e-300);
            if cross(o, a, p) / len <= COLLINEAR_TOL {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    if let Some(min) = hull.iter().map(|&i| points[i].1).reduce(f64::min) {
        if let Some(cut) = hull
            .iter()
            .position(|&i| points[i].1 <= min + COLLINEAR_TOL)
        {
            hull.truncate(cut + 1);
        }
    }
    hull
}

/// Operating points and their lower convex hull.
#[derive(Clone, Debug, Serialize)]
pub struct RdCurve {
    pub points: Vec<OperatingPoint>,
    /// Indices into `points`, ascending in rate.
    pub hull: Vec<usize>,
}

impl RdCurve {
    pub fn new(points: Vec<OperatingPoint>) -> Self {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.rate, p.distortion)).collect();
        let hull = lower_hull(&xy);
        RdCurve { points, hull }
    }

    pub fn vertices(&self) -> Vec<(f64, f64)> {
        self.hull
            .iter()
            .map(|&i| (self.points[i].rate, self.points[i].distortion))
            .collect()
    }

    pub fn hull_points(&self) -> impl Iterator<Item = &OperatingPoint> {
        self.hull.iter().map(|&i| &self.points[i])
    }

    pub fn on_hull(&self, i: usize) -> bool {
        self.hull.contains(&i)
    }

    /// Hull value at rate `r`: linear between vertices (time sharing), flat
    /// beyond the last vertex.
    pub fn query(&self, r: f64) -> f64 {
        let v = self.vertices();
        let Some(&(r0, d0)) = v.first() else {
            return f64::INFINITY;
        };
        if r <= r0 {
            return if r < r0 - 1e-12 { f64::INFINITY } else { d0 };
        }
        for w in v.windows(2) {
            let ((ra, da), (rb, db)) = (w[0], w[1]);
            if r <= rb {
                let t = (r - ra) / (rb - ra);
                return da + t * (db - da);
            }
        }
        v[v.len() - 1].1
    }

    /// Largest-rate hull vertex with rate at most `r` (plus a tiny slack).
    pub fn vertex_at_most(&self, r: f64) -> Option<&OperatingPoint> {
        self.hull_points().filter(|p| p.rate <= r + 1e-12).last()
    }

    /// Hull vertices bracketing `r`: `(left, right)`; equal when `r` is at
    /// or beyond a vertex end.
    pub fn bracket(&self, r: f64) -> Option<(&OperatingPoint, &OperatingPoint)> {
        let left = self.vertex_at_most(r)?;
        let right = self
            .hull_points()
            .find(|p| p.rate > r + 1e-12)
            .unwrap_or(left);
        Some((left, right))
    }

    /// Minimum over raw points with rate at most `r`, without convexification.
    pub fn pointwise_min(&self, r: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.rate <= r + 1e-12)
            .map(|p| p.distortion)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_distortion(&self) -> f64 {
        self.vertices().last().map_or(f64::INFINITY, |v| v.1)
    }
}

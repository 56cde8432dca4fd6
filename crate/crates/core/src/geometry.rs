//! Small planar-geometry toolkit shared by the polygon and shrinking modules.

use serde::{Deserialize, Serialize};

/// A point or displacement in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Z-component of the cross product (signed parallelogram area).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotate 90 degrees counterclockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        Vec2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        self.scale(s)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Solve the 2x2 system `[a; b] v = [1, 1]` for `v`.
///
/// Returns `None` when the rows are (near-)parallel; callers fall back to
/// translating along the shared normal in that case.
pub fn solve_unit_pair(a: Vec2, b: Vec2, det_tol: f64) -> Option<Vec2> {
    let det = a.cross(b);
    if det.abs() < det_tol {
        return None;
    }
    Some(Vec2::new((b.y - a.y) / det, (a.x - b.x) / det))
}

/// Intersection of two lines given in normal form `n·x = c`.
pub fn intersect_lines(n1: Vec2, c1: f64, n2: Vec2, c2: f64, det_tol: f64) -> Option<Vec2> {
    let det = n1.cross(n2);
    if det.abs() < det_tol {
        return None;
    }
    Some(Vec2::new(
        (c1 * n2.y - c2 * n1.y) / det,
        (n1.x * c2 - n2.x * c1) / det,
    ))
}

/// Twice the signed area of a polygon (positive for counterclockwise order).
pub fn signed_area_2x(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    acc
}

/// Check convexity allowing collinear runs: all turn cross products must
/// carry the orientation sign within `tol` (tolerance is in squared-length
/// units, so scale it with the polygon).
pub fn is_convex(pts: &[Vec2], tol: f64) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let orient = signed_area_2x(pts).signum();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let turn = (b - a).cross(c - b);
        if turn * orient < -tol {
            return false;
        }
    }
    true
}

/// Axis-aligned bounding box as (min, max).
pub fn bounding_box(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Shortest distance between two closed segments.
pub fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_properly_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn segments_properly_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Interior crossing depth of two segments: how far the segments overlap
/// beyond what shared endpoints explain. Returns the penetration distance,
/// ~0 for segments that merely touch at endpoints.
pub fn interior_crossing_depth(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if !segments_properly_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    // Proper crossing: report the smaller clearance an endpoint would need
    // to move to undo it.
    let m = point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1));
    m.max(f64::MIN_POSITIVE)
}

/// Gaussian-elimination solve for small dense systems (used by the affine
/// fit, at most 4x4). Returns `None` when the pivot collapses.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, pivot_tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let mut best = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[best][col].abs() {
                best = row;
            }
        }
        if a[best][col].abs() < pivot_tol {
            return None;
        }
        a.swap(col, best);
        b.swap(col, best);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cross_and_perp_orientation() {
        let e1 = Vec2::new(1.0, 0.0);
        assert_abs_diff_eq!(e1.cross(e1.perp()), 1.0);
    }

    #[test]
    fn line_intersection_basic() {
        // x = 2 and y = 3
        let p = intersect_lines(Vec2::new(1.0, 0.0), 2.0, Vec2::new(0.0, 1.0), 3.0, 1e-12).unwrap();
        assert_abs_diff_eq!(p.x, 2.0);
        assert_abs_diff_eq!(p.y, 3.0);
    }

    #[test]
    fn parallel_lines_are_rejected() {
        assert!(intersect_lines(Vec2::new(0.0, 1.0), 0.0, Vec2::new(0.0, 1.0), 1.0, 1e-12).is_none());
    }

    #[test]
    fn convexity_tolerates_collinear_vertices() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(is_convex(&pts, 1e-9));
        let mut dented = pts.clone();
        dented[1].y = 0.2;
        assert!(!is_convex(&dented, 1e-9));
    }

    #[test]
    fn dense_solver_recovers_solution() {
        let a = vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(x_true.iter()).map(|(c, x)| c * x).sum())
            .collect();
        let x = solve_dense(a, b, 1e-12).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_distance(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
        );
        assert_abs_diff_eq!(d, 1.0);
        let crossing = segment_distance(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
        );
        assert_abs_diff_eq!(crossing, 0.0);
    }
}

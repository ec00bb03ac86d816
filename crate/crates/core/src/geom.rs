//! Small planar geometry helpers shared by the modules.

use nalgebra::{Matrix2, Vector2};

pub type Point = Vector2<f64>;

#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Vector2::new(x, y)
}

/// 2D cross product `a × b`.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counter-clockwise rotation by 90°.
#[inline]
pub fn perp(a: Point) -> Point {
    pt(-a.y, a.x)
}

/// Eigen-decomposition of a symmetric 2×2 matrix.
///
/// Eigenvalues come out ascending; each eigenvector is normalized and its sign
/// is fixed so that its first non-negligible component is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 2],
    pub vectors: [Point; 2],
}

pub fn sym_eigen(m: &Matrix2<f64>) -> SymEigen {
    let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    let lo = mean - r;
    let hi = mean + r;
    // Eigenvector of the larger eigenvalue via the half-angle formula, which
    // stays accurate for nearly diagonal matrices.
    let theta = 0.5 * b.atan2(half_diff);
    let v_hi = canonical_sign(pt(theta.cos(), theta.sin()));
    let v_lo = canonical_sign(perp(v_hi));
    SymEigen {
        values: [lo, hi],
        vectors: [v_lo, v_hi],
    }
}

fn canonical_sign(v: Point) -> Point {
    if v.x > 1e-12 || (v.x.abs() <= 1e-12 && v.y > 0.0) {
        v
    } else {
        -v
    }
}

/// Intersection of segments `p0p1` and `q0q1`, returned as `(s, t)` parameters.
pub fn segment_intersection(p0: Point, p1: Point, q0: Point, q1: Point) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = cross(r, s);
    if denom.abs() < 1e-300 {
        return None;
    }
    let qp = q0 - p0;
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub fn point_polyline_distance(p: Point, line: &[Point]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => (p - line[0]).norm(),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Whether segment `ab` crosses any edge of `line`.
pub fn segment_crosses_polyline(a: Point, b: Point, line: &[Point]) -> bool {
    line.windows(2)
        .any(|w| segment_intersection(a, b, w[0], w[1]).is_some())
}

pub fn polyline_length(line: &[Point]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one_way = |from: &[Point], to: &[Point]| {
        from.iter()
            .map(|&p| point_polyline_distance(p, to))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_and_rotated() {
        let e = sym_eigen(&Matrix2::new(2.0, 0.0, 0.0, -3.0));
        assert_eq!(e.values, [-3.0, 2.0]);
        assert!((e.vectors[1] - pt(1.0, 0.0)).norm() < 1e-15);
        assert!((e.vectors[0] - pt(0.0, 1.0)).norm() < 1e-15);

        let m = Matrix2::new(2.0, -1.0, -1.0, 0.0);
        let e = sym_eigen(&m);
        for k in 0..2 {
            let v = e.vectors[k];
            assert!((m * v - v * e.values[k]).norm() < 1e-13);
        }
        assert!(e.values[0] < 0.0 && e.values[1] > 0.0);
    }

    #[test]
    fn segments() {
        let hit = segment_intersection(pt(0.0, 0.0), pt(2.0, 0.0), pt(1.0, -1.0), pt(1.0, 1.0));
        assert_eq!(hit, Some((0.5, 0.5)));
        assert!(segment_intersection(pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0)).is_none());
        assert_eq!(point_segment_distance(pt(0.5, 2.0), pt(0.0, 0.0), pt(1.0, 0.0)), 2.0);
    }
}

//! Critical points of `f_x`, their classification and the winding of `∇f_x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FlowTolerances;
use crate::caustic::Window;
use crate::error::{Error, Result};
use crate::field::GeneratingFunction;
use crate::geom::{pt, sym_eigen, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    UnstableNode,
    Saddle,
    StableNode,
    Degenerate,
}

impl CriticalKind {
    pub fn is_node(self) -> bool {
        matches!(self, Self::UnstableNode | Self::StableNode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub id: usize,
    pub position: Point,
    /// Ascending.
    pub hessian_eigenvalues: [f64; 2],
    /// Unit eigenvectors matching `hessian_eigenvalues`, first component
    /// non-negative. For a saddle `[0]` is stable and `[1]` unstable.
    pub eigenvectors: [Point; 2],
    pub morse_index: u8,
    pub kind: CriticalKind,
}

impl CriticalPoint {
    pub fn stable_direction(&self) -> Point {
        self.eigenvectors[0]
    }

    pub fn unstable_direction(&self) -> Point {
        self.eigenvectors[1]
    }

    /// Dimension of the unstable manifold under the `+∇f_x` flow.
    pub fn unstable_dimension(&self) -> i32 {
        self.hessian_eigenvalues.iter().filter(|&&l| l > 0.0).count() as i32
    }

    /// Poincaré index contribution: +1 for nodes, -1 for saddles.
    pub fn index_sign(&self) -> i32 {
        match self.kind {
            CriticalKind::Saddle => -1,
            CriticalKind::Degenerate => 0,
            _ => 1,
        }
    }
}

/// Morse index (number of negative eigenvalues) and kind under `dy/dt = +∇f_x`.
pub fn classify(eigenvalues: [f64; 2], tol_degenerate: f64) -> (u8, CriticalKind) {
    let index = eigenvalues.iter().filter(|&&l| l < 0.0).count() as u8;
    if eigenvalues.iter().any(|l| l.abs() < tol_degenerate) {
        return (index, CriticalKind::Degenerate);
    }
    let kind = match index {
        0 => CriticalKind::UnstableNode,
        1 => CriticalKind::Saddle,
        _ => CriticalKind::StableNode,
    };
    (index, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub points: Vec<CriticalPoint>,
    /// Winding of `∇f_x` along the window boundary, if computable.
    pub boundary_winding: Option<i32>,
    /// `None` when the check could not be made (degenerate points, boundary
    /// too close to a zero).
    pub index_consistent: Option<bool>,
    pub seed_grid: usize,
}

impl RootSet {
    pub fn has_degenerate(&self) -> bool {
        self.points.iter().any(|c| c.kind == CriticalKind::Degenerate)
    }
}

/// Damped Newton on `∇f(y) = x` from `y0`.
pub(crate) fn newton(f: &GeneratingFunction, x: Point, y0: Point, reach: f64, tol: f64) -> Option<Point> {
    let mut y = y0;
    let (g, mut h) = f.gradient_hessian(y);
    let mut r = g - x;
    let mut rn = r.norm();
    for _ in 0..80 {
        if rn <= tol {
            return Some(y);
        }
        let det = h.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return None;
        }
        let step = -pt(h[(1, 1)] * r.x - h[(0, 1)] * r.y, -h[(1, 0)] * r.x + h[(0, 0)] * r.y) / det;
        let mut lambda = 1.0;
        loop {
            let cand = y + step * lambda;
            let (g2, h2) = f.gradient_hessian(cand);
            let r2 = g2 - x;
            let rn2 = r2.norm();
            if rn2.is_finite() && rn2 < rn * (1.0 - 1e-4 * lambda) {
                y = cand;
                r = r2;
                rn = rn2;
                h = h2;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return if rn <= tol { Some(y) } else { None };
            }
        }
        if y.norm() > reach {
            return None;
        }
    }
    (rn <= tol).then_some(y)
}

pub(crate) fn make_point(f: &GeneratingFunction, y: Point, tol: &FlowTolerances) -> CriticalPoint {
    let h = f.hessian(y);
    let e = sym_eigen(&h);
    let (morse_index, mut kind) = classify(e.values, tol.degenerate);
    // A multiple root is only resolved to about sqrt(tol_root), where the
    // eigenvalues need not be small yet but the determinant is.
    if h.determinant().abs() < tol.degenerate {
        kind = CriticalKind::Degenerate;
    }
    CriticalPoint {
        id: 0,
        position: y,
        hessian_eigenvalues: e.values,
        eigenvectors: e.vectors,
        morse_index,
        kind,
    }
}

fn seed_roots(f: &GeneratingFunction, x: Point, w: &Window, n: usize, tol: &FlowTolerances) -> Vec<Point> {
    let lo = w.min();
    let span = w.max() - lo;
    let reach = 4.0 * (w.center.norm() + span.norm());
    let mut found: Vec<Point> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let s = lo + pt(span.x * (i as f64 + 0.5) / n as f64, span.y * (j as f64 + 0.5) / n as f64);
            if let Some(y) = newton(f, x, s, reach, tol.root) {
                if w.contains(y) {
                    found.push(y);
                }
            }
        }
    }
    found
}

fn dedupe(f: &GeneratingFunction, mut pts: Vec<Point>, tol: &FlowTolerances) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut kept: Vec<Point> = Vec::new();
    for p in pts {
        // Near-degenerate roots are only located to about sqrt(tol_root).
        let near_degenerate = f.hessian(p).determinant().abs() < tol.degenerate.sqrt();
        let radius = if near_degenerate { 1e-4 } else { tol.dedupe };
        if kept.iter().all(|q| (p - q).norm() > radius) {
            kept.push(p);
        }
    }
    kept
}

/// All critical points of `f_x` in `w`, sorted by position and numbered in
/// that order.
pub fn solve_critical_points(f: &GeneratingFunction, x: Point, w: &Window, tol: &FlowTolerances) -> RootSet {
    let boundary_winding = poincare_index(f, x, &w.boundary(32)).ok();
    let mut n = tol.seed_grid.max(2);
    let mut found = Vec::new();
    let mut points;
    let mut consistent;
    let mut attempt = 0;
    loop {
        found.extend(seed_roots(f, x, w, n, tol));
        found = dedupe(f, found, tol);
        points = found.iter().map(|&y| make_point(f, y, tol)).collect::<Vec<_>>();
        let degenerate = points.iter().any(|c| c.kind == CriticalKind::Degenerate);
        consistent = match boundary_winding {
            Some(wind) if !degenerate => Some(points.iter().map(|c| c.index_sign()).sum::<i32>() == wind),
            _ => None,
        };
        if consistent != Some(false) || attempt == 3 {
            break;
        }
        attempt += 1;
        n *= 2;
    }
    for (id, c) in points.iter_mut().enumerate() {
        c.id = id;
    }
    RootSet {
        points,
        boundary_winding,
        index_consistent: consistent,
        seed_grid: n,
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn angle_increment(
    field: &impl Fn(Point) -> Point,
    a: Point,
    b: Point,
    va: Point,
    vb: Point,
    depth: u32,
) -> Result<f64> {
    let d = wrap_angle(vb.y.atan2(vb.x) - va.y.atan2(va.x));
    if d.abs() <= 0.5 * PI {
        return Ok(d);
    }
    if depth >= 40 {
        if d.abs() < PI {
            return Ok(d);
        }
        return Err(Error::LoopTooClose { step: (b - a).norm() });
    }
    let m = 0.5 * (a + b);
    let vm = field(m);
    if vm.norm() == 0.0 {
        return Err(Error::LoopTooClose { step: (b - a).norm() });
    }
    Ok(angle_increment(field, a, m, va, vm, depth + 1)? + angle_increment(field, m, b, vm, vb, depth + 1)?)
}

/// Winding number of `∇f_x` along a closed polyline (the closing edge is
/// implied when the last point differs from the first).
pub fn poincare_index(f: &GeneratingFunction, x: Point, path: &[Point]) -> Result<i32> {
    if path.len() < 3 {
        return Err(Error::InvalidInput("loop needs at least three points".into()));
    }
    let field = |y: Point| f.gradient(y) - x;
    let mut pts = path.to_vec();
    if pts.first() != pts.last() {
        pts.push(pts[0]);
    }
    let values: Vec<Point> = pts.iter().map(|&p| field(p)).collect();
    if values.iter().any(|v| v.norm() == 0.0 || !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::LoopTooClose { step: 0.0 });
    }
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        total += angle_increment(&field, pts[k], pts[k + 1], values[k], values[k + 1], 0)?;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{elliptic_slice, NormalForm};

    fn window(h: f64) -> Window {
        Window::square(pt(0.0, 0.0), h, 16).unwrap()
    }

    #[test]
    fn classify_table() {
        assert_eq!(classify([2.0, 2.0], 1e-7), (0, CriticalKind::UnstableNode));
        assert_eq!(classify([-2.0, 3.0], 1e-7), (1, CriticalKind::Saddle));
        assert_eq!(classify([-1.0, -1.0], 1e-7), (2, CriticalKind::StableNode));
        assert_eq!(classify([0.0, 1.0], 1e-7).1, CriticalKind::Degenerate);
    }

    #[test]
    fn hyperbolic_four_points() {
        let f = NormalForm::HyperbolicUmbilic.generating_function();
        let r = solve_critical_points(&f, pt(1.0, 1.0), &window(3.0), &FlowTolerances::default());
        let got: Vec<(Point, CriticalKind)> = r.points.iter().map(|c| (c.position, c.kind)).collect();
        let want = [
            (pt(-1.0, -1.0), CriticalKind::StableNode),
            (pt(-1.0, 1.0), CriticalKind::Saddle),
            (pt(1.0, -1.0), CriticalKind::Saddle),
            (pt(1.0, 1.0), CriticalKind::UnstableNode),
        ];
        assert_eq!(got.len(), 4);
        for ((p, k), (q, l)) in got.iter().zip(want.iter()) {
            assert!((p - q).norm() < 1e-10);
            assert_eq!(k, l);
        }
        assert_eq!(r.index_consistent, Some(true));
        for (i, c) in r.points.iter().enumerate() {
            assert_eq!(c.id, i);
            assert!((f.gradient(c.position) - pt(1.0, 1.0)).norm() <= 1e-10);
        }
    }

    #[test]
    fn hyperbolic_no_points() {
        let f = NormalForm::HyperbolicUmbilic.generating_function();
        let r = solve_critical_points(&f, pt(1.0, -1.0), &window(3.0), &FlowTolerances::default());
        assert!(r.points.is_empty());
        assert_eq!(r.boundary_winding, Some(0));
    }

    #[test]
    fn slice_inside_tricuspoid() {
        let f = elliptic_slice(1.0);
        let x = pt(-0.25, 0.0);
        let r = solve_critical_points(&f, x, &window(4.0), &FlowTolerances::default());
        let s3 = 3f64.sqrt() / 2.0;
        let want = [
            (pt(-1.0 - s3, 0.0), CriticalKind::Saddle),
            (pt(-1.0 + s3, 0.0), CriticalKind::UnstableNode),
            (pt(0.0, -0.5), CriticalKind::Saddle),
            (pt(0.0, 0.5), CriticalKind::Saddle),
        ];
        assert_eq!(r.points.len(), 4);
        for (c, (q, k)) in r.points.iter().zip(want.iter()) {
            assert!((c.position - q).norm() < 1e-9, "{:?} vs {:?}", c.position, q);
            assert_eq!(c.kind, *k);
        }
        assert_eq!(r.boundary_winding, Some(-2));
        assert_eq!(r.index_consistent, Some(true));
    }

    #[test]
    fn winding_of_circles() {
        let f = elliptic_slice(1.0);
        let x = pt(-0.25, 0.0);
        let circle = |c: Point, r: f64| -> Vec<Point> {
            (0..64)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 64.0;
                    c + pt(a.cos(), a.sin()) * r
                })
                .collect()
        };
        assert_eq!(poincare_index(&f, x, &circle(pt(0.0, 0.0), 10.0)).unwrap(), -2);
        assert_eq!(poincare_index(&f, x, &circle(pt(0.0, 0.5), 0.05)).unwrap(), -1);
        let node = pt(-1.0 + 3f64.sqrt() / 2.0, 0.0);
        assert_eq!(poincare_index(&f, x, &circle(node, 0.05)).unwrap(), 1);
        assert_eq!(poincare_index(&f, x, &circle(pt(3.0, 3.0), 0.05)).unwrap(), 0);
    }

    #[test]
    fn loop_through_zero_is_rejected() {
        let f = NormalForm::HyperbolicUmbilic.generating_function();
        let sq = [pt(1.0, 1.0), pt(2.0, 1.0), pt(2.0, 2.0), pt(1.0, 2.0)];
        assert!(matches!(
            poincare_index(&f, pt(1.0, 1.0), &sq),
            Err(Error::LoopTooClose { .. })
        ));
    }
}

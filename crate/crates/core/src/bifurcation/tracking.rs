//! Following critical points and their labels as the base point moves.

use crate::caustic::Window;
use crate::field::GeneratingFunction;
use crate::flow::{make_point, newton, CriticalKind, CriticalPoint, FlowTolerances};
use crate::geom::Point;

/// Correspondence from the critical points of one portrait (`b`) to those of
/// a nearby one (`a`).
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `map[id in b] = id in a`.
    pub map: Vec<usize>,
    /// Per id in `b`: whether the unstable / stable eigenvector of `b` points
    /// against the matched one in `a`.
    pub flips: Vec<(bool, bool)>,
}

fn min_pairwise(cps: &[CriticalPoint]) -> f64 {
    let mut m = f64::INFINITY;
    for (k, a) in cps.iter().enumerate() {
        for b in &cps[k + 1..] {
            m = m.min((a.position - b.position).norm());
        }
    }
    m
}

/// Largest displacement accepted when following a labeled point: a quarter
/// of the smallest distance between critical points.
pub fn max_jump(cps: &[CriticalPoint]) -> f64 {
    0.25 * min_pairwise(cps)
}

/// Nearest-neighbour matching of `b` onto `a` (same kinds, bijective, every
/// jump below [`max_jump`] of `a`).
pub fn match_points(a: &[CriticalPoint], b: &[CriticalPoint]) -> Option<Matching> {
    if a.len() != b.len() {
        return None;
    }
    let jump = max_jump(a);
    let mut used = vec![false; a.len()];
    let mut map = Vec::with_capacity(b.len());
    let mut flips = Vec::with_capacity(b.len());
    for q in b {
        let (k, d) = a
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind == q.kind)
            .map(|(k, p)| (k, (p.position - q.position).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        if used[k] || d > jump {
            return None;
        }
        used[k] = true;
        map.push(k);
        let p = &a[k];
        flips.push((
            p.unstable_direction().dot(&q.unstable_direction()) < 0.0,
            p.stable_direction().dot(&q.stable_direction()) < 0.0,
        ));
    }
    Some(Matching { map, flips })
}

/// Critical points followed by continuation; ids and eigenvector signs are
/// kept from the point where tracking started.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackContext {
    pub x: Point,
    pub cps: Vec<CriticalPoint>,
}

impl TrackContext {
    pub fn new(x: Point, cps: Vec<CriticalPoint>) -> Self {
        Self { x, cps }
    }

    /// Moves every tracked point to base point `x` by Newton continuation.
    /// Fails when a point is lost, changes kind or jumps too far.
    pub fn advance(&self, f: &GeneratingFunction, x: Point, fiber: &Window, tol: &FlowTolerances) -> Option<TrackContext> {
        let jump = max_jump(&self.cps);
        let reach = 4.0 * (fiber.center.norm() + fiber.half_widths[0] + fiber.half_widths[1]);
        let mut cps = Vec::with_capacity(self.cps.len());
        for c in &self.cps {
            // Linear predictor from the inverse Hessian: dy = H^-1 dx.
            let h = f.hessian(c.position);
            let guess = h
                .try_inverse()
                .map(|hi| c.position + hi * (x - self.x))
                .filter(|g| (g - c.position).norm() <= jump)
                .unwrap_or(c.position);
            let y = newton(f, x, guess, reach, tol.root)?;
            if (y - c.position).norm() > jump || !fiber.contains(y) {
                return None;
            }
            let mut n = make_point(f, y, tol);
            if n.kind != c.kind || n.kind == CriticalKind::Degenerate {
                return None;
            }
            for k in 0..2 {
                if n.eigenvectors[k].dot(&c.eigenvectors[k]) < 0.0 {
                    n.eigenvectors[k] = -n.eigenvectors[k];
                }
            }
            n.id = c.id;
            cps.push(n);
        }
        if min_pairwise(&cps) < tol.dedupe {
            return None;
        }
        Some(TrackContext { x, cps })
    }
}

/// Continuation from `from` to `x` with up to `depth` halvings of the
/// step where a direct move fails.
pub fn track(
    f: &GeneratingFunction,
    from: &TrackContext,
    x: Point,
    fiber: &Window,
    tol: &FlowTolerances,
    depth: usize,
) -> Option<TrackContext> {
    if let Some(c) = from.advance(f, x, fiber, tol) {
        return Some(c);
    }
    if depth == 0 {
        return None;
    }
    let mid = 0.5 * (from.x + x);
    let half = track(f, from, mid, fiber, tol, depth - 1)?;
    track(f, &half, x, fiber, tol, depth - 1)
}

/// Matching of the critical points at `xb` onto those at `xa`, by continuation
/// along the segment when nearest-neighbour matching is ambiguous.
pub fn match_along(
    f: &GeneratingFunction,
    xa: Point,
    a: &[CriticalPoint],
    xb: Point,
    b: &[CriticalPoint],
    fiber: &Window,
    tol: &FlowTolerances,
) -> Option<Matching> {
    if a.len() != b.len() {
        return None;
    }
    if let Some(m) = match_points(a, b) {
        return Some(m);
    }
    let moved = track(f, &TrackContext::new(xa, a.to_vec()), xb, fiber, tol, 6)?;
    match_points(&moved.cps, b)
}

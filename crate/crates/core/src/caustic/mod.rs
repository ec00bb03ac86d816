//! Critical locus `{det Hf = 0}`, its image under the Lagrangian map, and the
//! fold/cusp classification of caustic points.
//!
//! The locus is contoured with marching squares on the fiber window and every
//! vertex is Newton-projected back onto the zero set. Singular points of the
//! locus (common zeros of `det Hf` and its gradient) are located separately:
//! isolated zeros become degenerate points, crossings are used to split and
//! re-join the contour so that straight branches pass through the crossing.
//! A locus vertex is a cusp where the Hessian kernel is tangent to the locus,
//! i.e. where `k · ∇det` changes sign.

pub mod contour;

use std::collections::BTreeSet;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

pub use contour::{contour, Polyline, Window};

use crate::field::{elliptic_slice, GeneratingFunction};
use crate::geom::{point_polyline_distance, segment_crosses_polyline, sym_eigen, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausticTolerances {
    /// Bound on `|det H|` at refined locus vertices.
    pub locus: f64,
    /// Threshold on `(det H)^2` for isolated zeros.
    pub isolated_sq: f64,
    /// Arclength tolerance of cusp refinement.
    pub cusp_arclength: f64,
    /// Eigenvalues below this are treated as zero.
    pub degenerate_eig: f64,
}

impl Default for CausticTolerances {
    fn default() -> Self {
        Self {
            locus: 1e-9,
            isolated_sq: 1e-12,
            cusp_arclength: 1e-10,
            degenerate_eig: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLocus {
    pub components: Vec<Polyline>,
    /// Isolated zeros of `det H` (no sign change around them).
    pub degenerate_points: Vec<Point>,
    /// Points where branches of the locus cross.
    pub crossing_points: Vec<Point>,
    pub max_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausticLabel {
    Unlabeled,
    Fold,
    Cusp,
    NonMorse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticComponent {
    /// Fiber preimages of the caustic vertices.
    pub locus: Vec<Point>,
    pub points: Vec<Point>,
    pub labels: Vec<CausticLabel>,
    pub closed: bool,
}

impl CausticComponent {
    pub fn path(&self) -> Vec<Point> {
        let mut p = self.points.clone();
        if self.closed && p.len() > 1 {
            p.push(p[0]);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticCurve {
    pub components: Vec<CausticComponent>,
    pub cusp_points: Vec<Point>,
    /// Images of isolated degenerate locus points; labeled non-Morse.
    pub degenerate_points: Vec<Point>,
    pub warnings: Vec<String>,
}

impl CausticCurve {
    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
            cusp_points: Vec::new(),
            degenerate_points: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn cusp_count(&self) -> usize {
        self.cusp_points.len()
    }

    pub fn distance(&self, x: Point) -> f64 {
        let lines = self
            .components
            .iter()
            .map(|c| point_polyline_distance(x, &c.path()));
        let pts = self.degenerate_points.iter().map(|p| (x - p).norm());
        lines.chain(pts).fold(f64::INFINITY, f64::min)
    }

    pub fn crosses_segment(&self, a: Point, b: Point) -> bool {
        self.components
            .iter()
            .any(|c| segment_crosses_polyline(a, b, &c.path()))
    }
}

/// `det Hf` packaged as a generating function, so its gradient and Hessian
/// come from the same formal machinery.
fn det_function(f: &GeneratingFunction) -> GeneratingFunction {
    GeneratingFunction::new(f.hessian_det_poly(), "det")
}

/// Newton projection of `y` onto `{det = 0}`, refusing moves longer than `max_move`.
fn project(det: &GeneratingFunction, y: Point, max_move: f64, tol: f64) -> Option<Point> {
    let mut p = y;
    for _ in 0..60 {
        let v = det.eval(p);
        if v.abs() <= tol {
            return Some(p);
        }
        let g = det.gradient(p);
        let g2 = g.norm_squared();
        if g2 == 0.0 || !g2.is_finite() {
            return None;
        }
        let step = g * (v / g2);
        p -= step;
        if (p - y).norm() > max_move {
            return None;
        }
        if step.norm() <= 1e-16 * (1.0 + p.norm()) {
            break;
        }
    }
    (det.eval(p).abs() <= tol.max(1e-9)).then_some(p)
}

/// Zeros of `∇det` inside the window, seeded from discrete minima of `|∇det|²`.
fn det_critical_points(det: &GeneratingFunction, w: &Window) -> Vec<Point> {
    let [nx, ny] = w.resolution;
    let step = w.step();
    let lo = w.min();
    let centre = |i: usize, j: usize| {
        lo + Point::new((i as f64 + 0.5) * step.x, (j as f64 + 0.5) * step.y)
    };
    let g2: Vec<f64> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| det.gradient(centre(i, j)).norm_squared())
        .collect();
    let at = |i: usize, j: usize| g2[j * nx + i];
    let mut found: Vec<Point> = Vec::new();
    let tol_move = 4.0 * w.max_step();
    for j in 0..ny {
        for i in 0..nx {
            let v = at(i, j);
            let mut is_min = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    if at(ii as usize, jj as usize) < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let seed = centre(i, j);
            let mut p = seed;
            let mut ok = false;
            for _ in 0..60 {
                let g = det.gradient(p);
                let h = det.hessian(p);
                let Some(inv) = h.try_inverse() else { break };
                let dp = inv * g;
                p -= dp;
                if (p - seed).norm() > tol_move {
                    break;
                }
                if dp.norm() <= 1e-15 * (1.0 + p.norm()) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                let g = det.gradient(p).norm();
                let scale = det.hessian(p).norm().max(1e-300);
                ok = g <= 1e-9 * scale;
            }
            if ok && w.contains(p) && found.iter().all(|q| (q - p).norm() > 1e-8) {
                found.push(p);
            }
        }
    }
    found
}

/// Computes the critical locus of `f` over the fiber window `w`.
pub fn critical_locus(f: &GeneratingFunction, w: &Window, tol: &CausticTolerances) -> CriticalLocus {
    let det = det_function(f);
    let mut warnings = Vec::new();
    if det.poly().is_zero() {
        warnings.push("det Hf vanishes identically; locus is the whole window".into());
        return CriticalLocus {
            components: Vec::new(),
            degenerate_points: Vec::new(),
            crossing_points: Vec::new(),
            max_residual: 0.0,
            warnings,
        };
    }
    let c = contour(w, |y| det.eval(y));
    if c.ambiguous_cells > 0 {
        warnings.push(format!(
            "resolution may be too coarse: {} ambiguous saddle cell(s)",
            c.ambiguous_cells
        ));
    }
    let mut lines: Vec<Polyline> = c.lines.into_iter().filter(|l| l.points.len() >= 2).collect();

    let rho = 1.5 * w.max_step();
    let iso_tol = tol.isolated_sq.sqrt();
    let mut degenerate_points = Vec::new();
    let mut crossing_points = Vec::new();
    for p in det_critical_points(&det, w) {
        let v = det.eval(p);
        let definite = det.hessian(p).determinant() > 0.0;
        if !definite {
            if v.abs() <= iso_tol {
                crossing_points.push(p);
            }
            continue;
        }
        // An extremum whose sign differs from the surrounding grid encloses a
        // loop that may be smaller than a cell; only when no such loop
        // resolves is the zero isolated.
        let near_contour = lines
            .iter()
            .any(|l| l.points.iter().any(|q| (q - p).norm() < 2.0 * w.max_step()));
        let loops = if near_contour {
            None
        } else {
            small_loops(&det, p, w, 4)
        };
        match loops {
            Some(mut loops) => lines.append(&mut loops),
            None if v.abs() <= iso_tol && !near_contour => degenerate_points.push(p),
            None => {}
        }
    }

    for &c in &crossing_points {
        lines = split_at_point(lines, c, rho);
    }
    lines.retain(|l| {
        !degenerate_points
            .iter()
            .any(|d| l.points.iter().all(|q| (q - d).norm() < rho))
    });

    let mut max_residual: f64 = 0.0;
    let mut unrefined = 0usize;
    for line in &mut lines {
        for y in &mut line.points {
            if det.eval(*y).abs() <= 1e-3 * tol.locus {
                continue;
            }
            match project(&det, *y, 2.0 * w.max_step(), 1e-3 * tol.locus) {
                Some(p) => *y = p,
                None => unrefined += 1,
            }
            max_residual = max_residual.max(det.eval(*y).abs());
        }
        dedupe(line);
    }
    lines.retain(|l| l.points.len() >= 2);
    if unrefined > 0 {
        warnings.push(format!("{unrefined} locus vertices failed to refine"));
    }
    if max_residual > tol.locus {
        warnings.push(format!("max |det H| residual {max_residual:.3e} exceeds tolerance"));
    }

    CriticalLocus {
        components: lines,
        degenerate_points,
        crossing_points,
        max_residual,
        warnings,
    }
}

fn dedupe(line: &mut Polyline) {
    line.points.dedup_by(|a, b| (*a - *b).norm() <= 1e-12);
    if line.closed && line.points.len() > 1 {
        let (first, last) = (line.points[0], line.points[line.points.len() - 1]);
        if (first - last).norm() <= 1e-12 {
            line.points.pop();
        }
    }
    if line.points.len() < 3 {
        line.closed = false;
    }
}

/// Contours a shrinking sub-window around an extremum of `det` until the
/// enclosing loop is resolved.
fn small_loops(det: &GeneratingFunction, p: Point, w: &Window, depth: usize) -> Option<Vec<Polyline>> {
    let nearest = {
        let lo = w.min();
        let s = w.step();
        let i = ((p.x - lo.x) / s.x).round().clamp(0.0, w.resolution[0] as f64);
        let j = ((p.y - lo.y) / s.y).round().clamp(0.0, w.resolution[1] as f64);
        w.node(i as usize, j as usize)
    };
    if (det.eval(p) >= 0.0) == (det.eval(nearest) >= 0.0) || depth == 0 {
        return None;
    }
    let half = 2.0 * w.max_step();
    let sub = Window::square(p, half, 32).ok()?;
    let loops: Vec<Polyline> = contour(&sub, |y| det.eval(y))
        .lines
        .into_iter()
        .filter(|l| l.closed && l.points.len() >= 3 && l.diameter() > 1e-9)
        .collect();
    if loops.is_empty() {
        small_loops(det, p, &sub, depth - 1)
    } else {
        Some(loops)
    }
}

/// Cuts every polyline inside the disc of radius `rho` around `c` and
/// re-joins the loose ends through `c`, pairing the most opposite directions.
fn split_at_point(lines: Vec<Polyline>, c: Point, rho: f64) -> Vec<Polyline> {
    struct Piece {
        pts: Vec<Point>,
        start_at_c: bool,
        end_at_c: bool,
    }
    let mut out = Vec::new();
    let mut pieces: Vec<Piece> = Vec::new();
    for line in lines {
        let near: Vec<bool> = line.points.iter().map(|q| (q - c).norm() < rho).collect();
        if !near.iter().any(|&b| b) {
            out.push(line);
            continue;
        }
        let n = line.points.len();
        let Some(first_far) = near.iter().position(|&b| !b) else { continue };
        let order: Vec<usize> = if line.closed {
            // Rotate so the traversal starts right after a near vertex.
            let start = (0..n)
                .map(|k| (first_far + k) % n)
                .find(|&k| !near[k] && near[(k + n - 1) % n])
                .unwrap_or(first_far);
            (0..n).map(|k| (start + k) % n).collect()
        } else {
            (0..n).collect()
        };
        let mut cur: Vec<Point> = Vec::new();
        let mut cur_start_at_c = false;
        let mut prev_near = line.closed; // rotated closed loops start after a near run
        for &k in &order {
            if near[k] {
                if !cur.is_empty() {
                    pieces.push(Piece {
                        pts: std::mem::take(&mut cur),
                        start_at_c: cur_start_at_c,
                        end_at_c: true,
                    });
                }
                prev_near = true;
            } else {
                if cur.is_empty() {
                    cur_start_at_c = prev_near;
                }
                cur.push(line.points[k]);
                prev_near = false;
            }
        }
        if !cur.is_empty() {
            let wraps = line.closed && near[order[0]] == false && near[(order[0] + n - 1) % n];
            pieces.push(Piece {
                pts: cur,
                start_at_c: cur_start_at_c,
                end_at_c: line.closed && wraps,
            });
        }
    }

    // Ends: 2*piece for the start, 2*piece+1 for the end.
    let mut free: Vec<(usize, Point)> = Vec::new();
    for (k, p) in pieces.iter().enumerate() {
        if p.start_at_c {
            free.push((2 * k, (p.pts[0] - c).normalize()));
        }
        if p.end_at_c {
            free.push((2 * k + 1, (p.pts[p.pts.len() - 1] - c).normalize()));
        }
    }
    let mut partner: Vec<Option<usize>> = vec![None; 2 * pieces.len()];
    while free.len() >= 2 {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..free.len() {
            for b in a + 1..free.len() {
                let d = free[a].1.dot(&free[b].1);
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        let (ea, eb) = (free[best.0].0, free[best.1].0);
        partner[ea] = Some(eb);
        partner[eb] = Some(ea);
        free.remove(best.1);
        free.remove(best.0);
    }
    // Unpaired ends still terminate at the crossing.
    let ends_at_c: BTreeSet<usize> = free.iter().map(|e| e.0).collect();

    let oriented = |e: usize| -> Vec<Point> {
        let pts = &pieces[e / 2].pts;
        if e % 2 == 0 {
            pts.clone()
        } else {
            pts.iter().rev().copied().collect()
        }
    };
    let mut visited = vec![false; pieces.len()];
    for k in 0..pieces.len() {
        if visited[k] {
            continue;
        }
        // Walk backwards to the beginning of the chain.
        let mut e = 2 * k;
        let mut closed = false;
        loop {
            match partner[e] {
                None => break,
                Some(q) => {
                    let next = q ^ 1;
                    if next / 2 == k {
                        closed = true;
                        e = 2 * k;
                        break;
                    }
                    e = next;
                }
            }
        }
        let mut pts = Vec::new();
        if !closed && ends_at_c.contains(&e) {
            pts.push(c);
        }
        let first_piece = e / 2;
        loop {
            visited[e / 2] = true;
            pts.extend(oriented(e));
            let exit = e ^ 1;
            match partner[exit] {
                None => {
                    if ends_at_c.contains(&exit) {
                        pts.push(c);
                    }
                    break;
                }
                Some(q) => {
                    pts.push(c);
                    if q / 2 == first_piece {
                        break;
                    }
                    e = q;
                }
            }
        }
        out.push(Polyline::new(pts, closed));
    }
    out
}

/// Maps locus vertices through `∇f`; labels are left unset.
pub fn push_forward(f: &GeneratingFunction, locus: &CriticalLocus) -> CausticCurve {
    let components = locus
        .components
        .iter()
        .map(|l| CausticComponent {
            locus: l.points.clone(),
            points: l.points.iter().map(|&y| f.gradient(y)).collect(),
            labels: vec![CausticLabel::Unlabeled; l.points.len()],
            closed: l.closed,
        })
        .collect();
    CausticCurve {
        components,
        cusp_points: Vec::new(),
        degenerate_points: locus.degenerate_points.iter().map(|&y| f.gradient(y)).collect(),
        warnings: locus.warnings.clone(),
    }
}

/// Kernel direction of the Hessian (eigenvector of the smaller-magnitude eigenvalue).
fn kernel(h: &Matrix2<f64>) -> (Point, bool, [f64; 2]) {
    let e = sym_eigen(h);
    let k = if e.values[0].abs() <= e.values[1].abs() {
        e.vectors[0]
    } else {
        e.vectors[1]
    };
    (k, true, e.values)
}

/// Labels every caustic vertex as fold, cusp or non-Morse; cusps are refined
/// and inserted as explicit vertices.
pub fn classify_caustic(
    f: &GeneratingFunction,
    locus: &CriticalLocus,
    tol: &CausticTolerances,
) -> CausticCurve {
    let det = det_function(f);
    let mut out = CausticCurve::empty();
    out.warnings = locus.warnings.clone();
    out.degenerate_points = locus.degenerate_points.iter().map(|&y| f.gradient(y)).collect();

    for line in &locus.components {
        let n = line.points.len();
        let info: Vec<(Point, bool)> = line
            .points
            .iter()
            .map(|&y| {
                let (k, _, ev) = kernel(&f.hessian(y));
                let non_morse = ev[0].abs() < tol.degenerate_eig && ev[1].abs() < tol.degenerate_eig;
                (k, non_morse)
            })
            .collect();
        let tangency = |y: Point, k: Point| k.dot(&det.gradient(y));

        let mut locus_pts: Vec<Point> = Vec::with_capacity(n + 4);
        let mut labels: Vec<CausticLabel> = Vec::with_capacity(n + 4);
        let edges = if line.closed { n } else { n.saturating_sub(1) };
        for idx in 0..n {
            locus_pts.push(line.points[idx]);
            labels.push(if info[idx].1 {
                CausticLabel::NonMorse
            } else {
                CausticLabel::Fold
            });
            if idx >= edges {
                continue;
            }
            let jdx = (idx + 1) % n;
            if info[idx].1 || info[jdx].1 {
                continue;
            }
            let (p, q) = (line.points[idx], line.points[jdx]);
            let kp = info[idx].0;
            let align = |k: Point| if k.dot(&kp) < 0.0 { -k } else { k };
            let gp = tangency(p, kp);
            let gq = tangency(q, align(info[jdx].0));
            if gp == 0.0 {
                labels.pop();
                labels.push(CausticLabel::Cusp);
                continue;
            }
            if gp * gq >= 0.0 {
                continue;
            }
            if let Some(cusp) = refine_cusp(f, &det, p, q, kp, gp, tol) {
                locus_pts.push(cusp);
                labels.push(CausticLabel::Cusp);
            }
        }
        let points: Vec<Point> = locus_pts.iter().map(|&y| f.gradient(y)).collect();
        for (k, l) in labels.iter().enumerate() {
            if *l == CausticLabel::Cusp {
                out.cusp_points.push(points[k]);
            }
        }
        out.components.push(CausticComponent {
            locus: locus_pts,
            points,
            labels,
            closed: line.closed,
        });
    }
    out
}

/// Bisection on the sign of `k · ∇det` along the chord `pq`, with each probe
/// projected back onto the locus.
fn refine_cusp(
    f: &GeneratingFunction,
    det: &GeneratingFunction,
    p: Point,
    q: Point,
    kp: Point,
    gp: f64,
    tol: &CausticTolerances,
) -> Option<Point> {
    let len = (q - p).norm();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let probe = |s: f64| -> Option<(Point, f64)> {
        let y0 = p + (q - p) * s;
        let y = project(det, y0, len.max(1e-12), 1e-3 * tol.locus).unwrap_or(y0);
        let (k, _, _) = kernel(&f.hessian(y));
        let k = if k.dot(&kp) < 0.0 { -k } else { k };
        Some((y, k.dot(&det.gradient(y))))
    };
    let mut best = p;
    while (hi - lo) * len > tol.cusp_arclength && hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        let (y, g) = probe(mid)?;
        best = y;
        if g == 0.0 {
            return Some(y);
        }
        if (g > 0.0) == (gp > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(best)
}

/// Critical locus, push-forward and classification in one call.
pub fn caustic(f: &GeneratingFunction, w: &Window, tol: &CausticTolerances) -> CausticCurve {
    let locus = critical_locus(f, w, tol);
    classify_caustic(f, &locus, tol)
}

/// Caustics of the pyramid slices `elliptic-umbilic + t*y1^2`.
pub fn pyramid_slices(t_values: &[f64], tol: &CausticTolerances) -> Vec<(f64, CausticCurve)> {
    use rayon::prelude::*;
    t_values
        .par_iter()
        .map(|&t| {
            let half = 1.25 * t.abs() + 0.25;
            let w = Window::square(Point::new(0.0, 0.0), half, 64).expect("valid slice window");
            (t, caustic(&elliptic_slice(t), &w, tol))
        })
        .collect()
}

//! Marching-squares extraction of the zero set of a scalar field on a window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{pt, Point};

/// Rectangular sampling window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub half_widths: [f64; 2],
    pub resolution: [usize; 2],
}

pub const MIN_RESOLUTION: usize = 16;

impl Window {
    pub fn new(center: Point, half_widths: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        let w = Self {
            center,
            half_widths,
            resolution,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn square(center: Point, half_width: f64, resolution: usize) -> Result<Self> {
        Self::new(center, [half_width; 2], [resolution; 2])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.half_widths.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidWindow(format!(
                "half-widths must be positive, got {:?}",
                self.half_widths
            )));
        }
        if !(self.center.x.is_finite() && self.center.y.is_finite()) {
            return Err(Error::InvalidWindow("non-finite centre".into()));
        }
        if self.resolution.iter().any(|&n| n < MIN_RESOLUTION) {
            return Err(Error::InvalidWindow(format!(
                "resolution must be at least {MIN_RESOLUTION} per axis, got {:?}",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> Point {
        self.center - pt(self.half_widths[0], self.half_widths[1])
    }

    pub fn max(&self) -> Point {
        self.center + pt(self.half_widths[0], self.half_widths[1])
    }

    pub fn step(&self) -> Point {
        pt(
            2.0 * self.half_widths[0] / self.resolution[0] as f64,
            2.0 * self.half_widths[1] / self.resolution[1] as f64,
        )
    }

    pub fn max_step(&self) -> f64 {
        let s = self.step();
        s.x.max(s.y)
    }

    /// Grid node `(i, j)` with `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`.
    pub fn node(&self, i: usize, j: usize) -> Point {
        let s = self.step();
        let lo = self.min();
        pt(lo.x + i as f64 * s.x, lo.y + j as f64 * s.y)
    }

    pub fn contains(&self, p: Point) -> bool {
        (p.x - self.center.x).abs() <= self.half_widths[0]
            && (p.y - self.center.y).abs() <= self.half_widths[1]
    }

    /// Counter-clockwise closed boundary, `per_side` points per side.
    pub fn boundary(&self, per_side: usize) -> Vec<Point> {
        let lo = self.min();
        let hi = self.max();
        let corners = [lo, pt(hi.x, lo.y), hi, pt(lo.x, hi.y)];
        let mut out = Vec::with_capacity(4 * per_side + 1);
        for k in 0..4 {
            let a = corners[k];
            let b = corners[(k + 1) % 4];
            for s in 0..per_side {
                out.push(a + (b - a) * (s as f64 / per_side as f64));
            }
        }
        out.push(lo);
        out
    }

    /// Position of a boundary point along the counter-clockwise perimeter,
    /// normalized to `[0, 1)`, starting at the lower-left corner.
    pub fn perimeter_parameter(&self, p: Point) -> f64 {
        let lo = self.min();
        let hi = self.max();
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        let per = 2.0 * (w + h);
        let q = pt(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y));
        let d = [q.y - lo.y, hi.x - q.x, hi.y - q.y, q.x - lo.x];
        let side = (0..4)
            .min_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap())
            .unwrap();
        let s = match side {
            0 => q.x - lo.x,
            1 => w + (q.y - lo.y),
            2 => w + h + (hi.x - q.x),
            _ => 2.0 * w + h + (hi.y - q.y),
        };
        (s / per).rem_euclid(1.0)
    }

    pub fn with_resolution(&self, resolution: [usize; 2]) -> Self {
        Self { resolution, ..*self }
    }
}

/// A polyline produced by contouring; `closed` loops do not repeat the first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Polyline {
    pub fn new(points: Vec<Point>, closed: bool) -> Self {
        Self { points, closed }
    }

    /// Points with the first repeated at the end for closed loops.
    pub fn path(&self) -> Vec<Point> {
        let mut p = self.points.clone();
        if self.closed && p.len() > 1 {
            p.push(p[0]);
        }
        p
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        let (mut lo, mut hi) = (pt(f64::INFINITY, f64::INFINITY), pt(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in &self.points {
            lo = pt(lo.x.min(p.x), lo.y.min(p.y));
            hi = pt(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !self.points.is_empty() {
            d = (hi - lo).norm();
        }
        d
    }
}

/// Result of a marching-squares pass.
#[derive(Debug, Clone)]
pub struct Contour {
    pub lines: Vec<Polyline>,
    /// Saddle cells whose centre value was too small to trust the disambiguation.
    pub ambiguous_cells: usize,
}

/// Extracts `{field = 0}` over `w`. Nodes with `field ≥ 0` count as inside.
pub fn contour<F>(w: &Window, field: F) -> Contour
where
    F: Fn(Point) -> f64 + Sync,
{
    let [nx, ny] = w.resolution;
    let values: Vec<f64> = (0..=ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let field = &field;
            (0..=nx).map(move |i| field(w.node(i, j)))
        })
        .collect();
    let val = |i: usize, j: usize| values[j * (nx + 1) + i];
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Edge ids: horizontal edges first, then vertical.
    let h_id = |i: usize, j: usize| j * nx + i;
    let v_id = |i: usize, j: usize| (ny + 1) * nx + j * (nx + 1) + i;
    let n_edges = (ny + 1) * nx + ny * (nx + 1);

    let mut crossing: Vec<Option<Point>> = vec![None; n_edges];
    let interp = |a: Point, b: Point, va: f64, vb: f64| {
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        a + (b - a) * t.clamp(0.0, 1.0)
    };
    for j in 0..=ny {
        for i in 0..nx {
            let (va, vb) = (val(i, j), val(i + 1, j));
            if (va >= 0.0) != (vb >= 0.0) {
                crossing[h_id(i, j)] = Some(interp(w.node(i, j), w.node(i + 1, j), va, vb));
            }
        }
    }
    for j in 0..ny {
        for i in 0..=nx {
            let (va, vb) = (val(i, j), val(i, j + 1));
            if (va >= 0.0) != (vb >= 0.0) {
                crossing[v_id(i, j)] = Some(interp(w.node(i, j), w.node(i, j + 1), va, vb));
            }
        }
    }

    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut ambiguous_cells = 0;
    for j in 0..ny {
        for i in 0..nx {
            let inside = [
                val(i, j) >= 0.0,
                val(i + 1, j) >= 0.0,
                val(i + 1, j + 1) >= 0.0,
                val(i, j + 1) >= 0.0,
            ];
            let bottom = h_id(i, j);
            let right = v_id(i + 1, j);
            let top = h_id(i, j + 1);
            let left = v_id(i, j);
            let case = inside
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                4 | 11 => segments.push((right, top)),
                8 | 7 => segments.push((top, left)),
                3 | 12 => segments.push((left, right)),
                6 | 9 => segments.push((bottom, top)),
                5 | 10 => {
                    let c = field((w.node(i, j) + w.node(i + 1, j + 1)) * 0.5);
                    if c.abs() <= 1e-3 * scale {
                        ambiguous_cells += 1;
                    }
                    let center_inside = c >= 0.0;
                    // case 5: bottom-left and top-right inside.
                    let diag_inside = case == 5;
                    if center_inside == diag_inside {
                        // The inside diagonal is connected; cut off the other two corners.
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    Contour {
        lines: stitch(&segments, &crossing),
        ambiguous_cells,
    }
}

/// Joins edge-to-edge segments into polylines, deterministically.
fn stitch(segments: &[(usize, usize)], crossing: &[Option<Point>]) -> Vec<Polyline> {
    use std::collections::BTreeMap;
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        adj.entry(a).or_default().push(k);
        adj.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let walk = |start_edge: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start_edge];
        let mut cur = start_edge;
        loop {
            let next = adj[&cur].iter().copied().find(|&s| !used[s]);
            match next {
                Some(s) => {
                    used[s] = true;
                    let (a, b) = segments[s];
                    cur = if a == cur { b } else { a };
                    if cur == start_edge {
                        return (chain, true);
                    }
                    chain.push(cur);
                }
                None => return (chain, false),
            }
        }
    };

    // Open chains start at edges touched by a single segment.
    let starts: Vec<usize> = adj
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(&e, _)| e)
        .collect();
    for e in starts {
        if adj[&e].iter().all(|&s| used[s]) {
            continue;
        }
        let (chain, closed) = walk(e, &mut used);
        lines.push(to_polyline(&chain, closed, crossing));
    }
    let all: Vec<usize> = adj.keys().copied().collect();
    for e in all {
        if adj[&e].iter().all(|&s| used[s]) {
            continue;
        }
        let (chain, closed) = walk(e, &mut used);
        lines.push(to_polyline(&chain, closed, crossing));
    }
    lines
}

fn to_polyline(chain: &[usize], closed: bool, crossing: &[Option<Point>]) -> Polyline {
    let mut pts: Vec<Point> = Vec::with_capacity(chain.len());
    for &e in chain {
        let p = crossing[e].expect("segment endpoint on an uncrossed edge");
        if pts.last().map_or(true, |q: &Point| (p - q).norm() > 1e-14) {
            pts.push(p);
        }
    }
    if closed && pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= 1e-14 {
        pts.pop();
    }
    Polyline::new(pts, closed)
}

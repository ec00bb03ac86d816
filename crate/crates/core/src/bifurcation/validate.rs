//! Structural checks on bifurcation diagrams.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::continuation::{BifurcationCurve, StratumVertex};
use super::diagram::BifurcationDiagram;
use super::tracking::match_along;
use crate::caustic::Window;
use crate::field::GeneratingFunction;
use crate::flow::{portrait, BranchRef, Limit, PhasePortrait, Signature};
use crate::geom::{perp, point_polyline_distance, point_segment_distance, segment_intersection, Point};
use crate::poly::Poly2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub witnesses: Vec<String>,
    pub notes: Vec<String>,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            ..Self::default()
        }
    }

    fn fail(&mut self, witness: String) {
        self.passed = false;
        self.witnesses.push(witness);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}: {}", c.name, if c.passed { "pass" } else { "FAIL" })?;
            for w in &c.witnesses {
                writeln!(f, "  witness: {w}")?;
            }
            for n in &c.notes {
                writeln!(f, "  note: {n}")?;
            }
        }
        if self.passed() {
            writeln!(f, "all checks passed")?;
        } else {
            writeln!(f, "validation failed")?;
        }
        Ok(())
    }
}

/// A point where two curves meet, with the connection data of each curve
/// interpolated there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub x: Point,
    pub first: StratumVertex,
    pub second: StratumVertex,
}

fn lerp(a: &StratumVertex, b: &StratumVertex, t: f64) -> StratumVertex {
    let mix = |p: Point, q: Point| p + (q - p) * t;
    let dir = |p: Point, q: Point| {
        let m = mix(p, q);
        if m.norm() > 0.0 {
            m.normalize()
        } else {
            p
        }
    };
    StratumVertex {
        x: mix(a.x, b.x),
        psi: a.psi + (b.psi - a.psi) * t,
        source: mix(a.source, b.source),
        target: mix(a.target, b.target),
        source_dir: dir(a.source_dir, b.source_dir),
        target_dir: dir(a.target_dir, b.target_dir),
    }
}

fn segments(c: &BifurcationCurve) -> Vec<(StratumVertex, StratumVertex)> {
    let v = &c.vertices;
    let mut out: Vec<_> = v.windows(2).map(|w| (w[0], w[1])).collect();
    if c.ends[1] == super::CurveEnd::Closed && v.len() > 2 {
        out.push((v[v.len() - 1], v[0]));
    }
    out
}

/// Where vertex `p` lies on segment `(a, b)`: interpolated vertex data.
fn on_segment(p: Point, a: &StratumVertex, b: &StratumVertex) -> Option<StratumVertex> {
    if point_segment_distance(p, a.x, b.x) > 1e-9 {
        return None;
    }
    let ab = b.x - a.x;
    let t = if ab.norm_squared() > 0.0 {
        ((p - a.x).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Some(lerp(a, b, t))
}

/// Transversal crossings and touching vertices of two curves.
pub fn curve_intersections(a: &BifurcationCurve, b: &BifurcationCurve) -> Vec<Crossing> {
    let sa = segments(a);
    let sb = segments(b);
    let mut out: Vec<Crossing> = Vec::new();
    let mut push = |c: Crossing| {
        if out.iter().all(|o| (o.x - c.x).norm() > 1e-9) {
            out.push(c);
        }
    };
    for (p0, p1) in &sa {
        for (q0, q1) in &sb {
            if let Some((s, t)) = segment_intersection(p0.x, p1.x, q0.x, q1.x) {
                let first = lerp(p0, p1, s);
                let second = lerp(q0, q1, t);
                push(Crossing {
                    x: first.x,
                    first,
                    second,
                });
            }
        }
    }
    // Overlapping collinear pieces have no transversal crossing.
    for v in &a.vertices {
        for (q0, q1) in &sb {
            if let Some(second) = on_segment(v.x, q0, q1) {
                push(Crossing {
                    x: v.x,
                    first: *v,
                    second,
                });
            }
        }
    }
    for v in &b.vertices {
        for (p0, p1) in &sa {
            if let Some(first) = on_segment(v.x, p0, p1) {
                push(Crossing {
                    x: v.x,
                    first,
                    second: *v,
                });
            }
        }
    }
    out
}

fn near(p: Point, q: Point, tol: f64) -> bool {
    (p - q).norm() < tol
}

fn saddle_tol(v: &StratumVertex) -> f64 {
    0.25 * (v.source - v.target).norm()
}

fn reversed(a: &StratumVertex, b: &StratumVertex) -> bool {
    let t = saddle_tol(a);
    near(a.source, b.target, t) && near(a.target, b.source, t)
}

fn same_saddles(a: &StratumVertex, b: &StratumVertex) -> bool {
    let t = saddle_tol(a);
    near(a.source, b.source, t) && near(a.target, b.target, t)
}

fn fmt_pt(p: Point) -> String {
    format!("({:.6}, {:.6})", p.x, p.y)
}

/// The connecting branches of `v` in the labels of portrait `p`.
fn identify(p: &PhasePortrait, v: &StratumVertex) -> Option<(BranchRef, BranchRef)> {
    let tol = saddle_tol(v);
    let nearest = |q: Point| {
        p.saddles()
            .map(|c| (c, (c.position - q).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|(_, d)| *d < tol)
            .map(|(c, _)| c)
    };
    let si = nearest(v.source)?;
    let sj = nearest(v.target)?;
    let bu = crate::flow::Branch::ALL
        .into_iter()
        .find(|b| b.is_unstable() && b.direction(si).dot(&v.source_dir) > 0.0)?;
    let bs = crate::flow::Branch::ALL
        .into_iter()
        .find(|b| !b.is_unstable() && b.direction(sj).dot(&v.target_dir) > 0.0)?;
    Some(((si.id, bu), (sj.id, bs)))
}

/// Signature with two branches removed from limits and cyclic orders.
fn without(sig: &Signature, drop: &[BranchRef]) -> Signature {
    let keep = |r: &BranchRef| !drop.contains(r);
    let mut s = sig.clone();
    s.limits.retain(|(i, b, _)| keep(&(*i, *b)));
    for g in s.exit_order.iter_mut() {
        g.retain(keep);
    }
    s.exit_order.retain(|g| !g.is_empty());
    // Restore canonical rotations after removal.
    s.relabel(&(0..s.kinds.len()).collect::<Vec<_>>(), &vec![(false, false); s.kinds.len()])
}

struct Raster {
    n: usize,
    lo: Point,
    cell: Point,
    wall: Vec<bool>,
}

impl Raster {
    fn new(w: &Window, n: usize) -> Self {
        let lo = w.min();
        let span = w.max() - lo;
        Self {
            n,
            lo,
            cell: Point::new(span.x / n as f64, span.y / n as f64),
            wall: vec![false; n * n],
        }
    }

    fn index(&self, p: Point) -> Option<usize> {
        let i = ((p.x - self.lo.x) / self.cell.x).floor();
        let j = ((p.y - self.lo.y) / self.cell.y).floor();
        if i < 0.0 || j < 0.0 || i >= self.n as f64 || j >= self.n as f64 {
            return None;
        }
        Some(j as usize * self.n + i as usize)
    }

    /// Marks the cells covered by a polyline, closing diagonal gaps.
    fn draw(&mut self, line: &[Point]) {
        let h = 0.25 * self.cell.x.min(self.cell.y);
        let mut prev: Option<usize> = None;
        for w in line.windows(2) {
            let len = (w[1] - w[0]).norm();
            let k = (len / h).ceil().max(1.0) as usize;
            for s in 0..=k {
                let p = w[0] + (w[1] - w[0]) * (s as f64 / k as f64);
                let cur = self.index(p);
                if let (Some(a), Some(b)) = (prev, cur) {
                    let (ai, aj, bi, bj) = (a % self.n, a / self.n, b % self.n, b / self.n);
                    if ai != bi && aj != bj {
                        self.wall[aj * self.n + bi] = true;
                        self.wall[bj * self.n + ai] = true;
                    }
                }
                if let Some(c) = cur {
                    self.wall[c] = true;
                }
                prev = cur;
            }
        }
    }

    fn free_cells(&self, line: &[Point]) -> Vec<usize> {
        line.iter()
            .filter_map(|&p| self.index(p))
            .filter(|&c| !self.wall[c])
            .collect()
    }

    fn connected(&self, from: &[usize], to: &[usize]) -> bool {
        let mut seen = vec![false; self.wall.len()];
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        for &c in from {
            seen[c] = true;
        }
        let target: std::collections::HashSet<usize> = to.iter().copied().collect();
        while let Some(c) = queue.pop_front() {
            if target.contains(&c) {
                return true;
            }
            let (i, j) = (c % self.n, c / self.n);
            let mut nb = Vec::with_capacity(4);
            if i > 0 {
                nb.push(c - 1);
            }
            if i + 1 < self.n {
                nb.push(c + 1);
            }
            if j > 0 {
                nb.push(c - self.n);
            }
            if j + 1 < self.n {
                nb.push(c + self.n);
            }
            for m in nb {
                if !seen[m] && !self.wall[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        false
    }
}

/// Whether the two branches lie in one component of the plane cut by the
/// separatrices of the other saddles and the node-saddle lines.
fn admissible(p: &PhasePortrait, u: BranchRef, s: BranchRef, fiber: &Window, raster: usize) -> Option<bool> {
    let mut r = Raster::new(fiber, raster);
    for sep in &p.separatrices {
        let me = (sep.saddle_id, sep.branch);
        if me == u || me == s {
            continue;
        }
        let other_saddle = sep.saddle_id != u.0 && sep.saddle_id != s.0;
        if other_saddle || matches!(sep.limit, Limit::Node(_)) {
            r.draw(&sep.trajectory);
        }
    }
    let find = |b: BranchRef| p.separatrix(b.0, b.1).map(|x| x.trajectory.clone());
    let from = r.free_cells(&find(u)?);
    let to = r.free_cells(&find(s)?);
    if from.is_empty() || to.is_empty() {
        return None;
    }
    Some(r.connected(&from, &to))
}

/// Vertex of `c` farthest from the caustic, the other curves and the ends.
fn probe_index(d: &BifurcationDiagram, ci: usize) -> usize {
    let c = &d.strata[ci];
    let n = c.vertices.len();
    let others: Vec<Vec<Point>> = d
        .strata
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != ci)
        .map(|(_, o)| o.path())
        .collect();
    let mut best = (n / 2, f64::NEG_INFINITY);
    for (k, v) in c.vertices.iter().enumerate() {
        let ends = if c.ends[1] == super::CurveEnd::Closed {
            f64::INFINITY
        } else {
            let along = |a: usize, b: usize| {
                c.vertices[a.min(b)..=a.max(b)]
                    .windows(2)
                    .map(|w| (w[1].x - w[0].x).norm())
                    .sum::<f64>()
            };
            along(0, k).min(along(k, n - 1))
        };
        let score = d
            .caustic
            .distance(v.x)
            .min(ends)
            .min(others.iter().map(|o| point_polyline_distance(v.x, o)).fold(f64::INFINITY, f64::min));
        if score > best.1 {
            best = (k, score);
        }
    }
    best.0
}

fn cell_size(d: &BifurcationDiagram) -> f64 {
    let span = d.base.max() - d.base.min();
    span.x.max(span.y) / d.settings.grid.max(2) as f64
}

fn side_checks(d: &BifurcationDiagram, f: &GeneratingFunction, admiss: &mut CheckResult, trans: &mut CheckResult) {
    let eta = d.settings.probe_offset * cell_size(d);
    let mut inconclusive = 0;
    for (ci, c) in d.strata.iter().enumerate() {
        if c.vertices.len() < 2 {
            inconclusive += 1;
            continue;
        }
        let k = probe_index(d, ci);
        let v = &c.vertices[k];
        let (a, b) = (k.saturating_sub(1), (k + 1).min(c.vertices.len() - 1));
        let t = c.vertices[b].x - c.vertices[a].x;
        if t.norm() == 0.0 {
            inconclusive += 1;
            continue;
        }
        let normal = perp(t).normalize();
        let pa = portrait(f, v.x + normal * eta, &d.fiber, &d.settings.flow);
        let pb = portrait(f, v.x - normal * eta, &d.fiber, &d.settings.flow);
        if pa.on_caustic || pb.on_caustic {
            inconclusive += 1;
            continue;
        }
        let label = format!("curve {ci} ({}) at {}", c.pair, fmt_pt(v.x));
        let (Some(m), Some((u, s))) = (
            match_along(f, pa.x, &pa.critical_points, pb.x, &pb.critical_points, &d.fiber, &d.settings.flow),
            identify(&pa, v),
        )
        else {
            trans.fail(format!("{label}: connecting saddles not found on both sides"));
            continue;
        };
        let rel = pb.signature.relabel(&m.map, &m.flips);
        if rel == pa.signature {
            trans.fail(format!("{label}: no change across the curve"));
        } else if without(&rel, &[u, s]) != without(&pa.signature, &[u, s]) {
            trans.fail(format!(
                "{label}: crossing changes more than s{}{} and s{}{}",
                u.0, u.1, s.0, s.1
            ));
        }
        let inv: Vec<usize> = {
            let mut inv = vec![0; m.map.len()];
            for (bi, &ai) in m.map.iter().enumerate() {
                inv[ai] = bi;
            }
            inv
        };
        let flip = |r: BranchRef, unstable: bool| {
            let bi = inv[r.0];
            let (fu, fs) = m.flips[bi];
            let fl = if unstable { fu } else { fs };
            (bi, if fl { r.1.flipped() } else { r.1 })
        };
        let from_node = |p: &PhasePortrait, r: BranchRef| {
            p.separatrix(r.0, r.1)
                .is_some_and(|x| matches!(x.limit, Limit::Node(_)))
        };
        if from_node(&pa, s) != from_node(&pb, flip(s, false)) {
            trans.notes.push(format!("{label}: node-saddle line into s{} breaks", s.0));
        }
        for (p, uu, ss) in [(&pa, u, s), (&pb, flip(u, true), flip(s, false))] {
            match admissible(p, uu, ss, &d.fiber, d.settings.raster) {
                Some(true) => {}
                Some(false) => admiss.fail(format!(
                    "{label}: s{}{} and s{}{} separated in the portrait at {}",
                    uu.0,
                    uu.1,
                    ss.0,
                    ss.1,
                    fmt_pt(p.x)
                )),
                None => inconclusive += 1,
            }
        }
    }
    if inconclusive > 0 {
        admiss.notes.push(format!("{inconclusive} probes inconclusive"));
    }
}

/// Runs all structural checks on a diagram.
pub fn validate_diagram(d: &BifurcationDiagram) -> ValidationReport {
    let mut excl = CheckResult::new("exclusion");
    let mut same = CheckResult::new("same-pair");
    let mut admiss = CheckResult::new("admissibility");
    let mut triple = CheckResult::new("triple-connection");
    let mut trans = CheckResult::new("transition");
    let mut closure = CheckResult::new("codim2-closure");
    let mut resid = CheckResult::new("residual");
    let mut regions = CheckResult::new("regions");

    if d.stats.exclusion_violations > 0 {
        excl.fail(format!(
            "{} samples certify a connection in both directions",
            d.stats.exclusion_violations
        ));
    }
    if d.stats.triple_connections > 0 {
        triple.fail(format!("{} samples with three connections", d.stats.triple_connections));
    }

    let mut crossings: Vec<(usize, usize, Crossing)> = Vec::new();
    for p in 0..d.strata.len() {
        for q in p + 1..d.strata.len() {
            for c in curve_intersections(&d.strata[p], &d.strata[q]) {
                crossings.push((p, q, c));
            }
        }
    }
    for (p, q, c) in &crossings {
        let (a, b) = (&c.first, &c.second);
        if reversed(a, b) {
            excl.fail(format!(
                "curves {p} and {q} connect the same saddles in opposite directions at {}",
                fmt_pt(c.x)
            ));
        } else if same_saddles(a, b) && !(a.source_dir.dot(&b.source_dir) > 0.0 && a.target_dir.dot(&b.target_dir) > 0.0) {
            same.fail(format!(
                "curves {p} and {q} join the same saddles through different branches at {}",
                fmt_pt(c.x)
            ));
        }
    }

    // Three curves through one point.
    let close = 0.5 * d.settings.step_min;
    for (k, (p, q, c)) in crossings.iter().enumerate() {
        for (p2, q2, c2) in &crossings[k + 1..] {
            let mut ids = vec![*p, *q, *p2, *q2];
            ids.sort();
            ids.dedup();
            if ids.len() >= 3 && (c.x - c2.x).norm() < close {
                triple.fail(format!("curves {ids:?} meet near {}", fmt_pt(c.x)));
            }
        }
    }

    // Codimension-2 chains i→j→k must lie on the closure of an i→k curve.
    let reach = d.settings.closure_factor * cell_size(d);
    for (p, q, c) in &crossings {
        let chain = if near(c.first.target, c.second.source, saddle_tol(&c.first)) {
            Some((c.first.source, c.second.target))
        } else if near(c.second.target, c.first.source, saddle_tol(&c.second)) {
            Some((c.second.source, c.first.target))
        } else {
            None
        };
        let Some((src, tgt)) = chain else {
            continue;
        };
        if (src - tgt).norm() < 1e-9 {
            continue;
        }
        let tol = 0.5 * (src - tgt).norm().min((c.first.source - c.first.target).norm());
        let found = d.strata.iter().enumerate().any(|(k, s)| {
            k != *p
                && k != *q
                && s.vertices.iter().any(|v| {
                    (v.x - c.x).norm() < reach && near(v.source, src, tol) && near(v.target, tgt, tol)
                })
        });
        if !found {
            closure.fail(format!(
                "curves {p} and {q} chain at {} with no closing curve within {reach:.3e}",
                fmt_pt(c.x)
            ));
        }
    }

    for (ci, c) in d.strata.iter().enumerate() {
        let r = c.max_residual();
        if r > d.settings.psi {
            resid.fail(format!("curve {ci} has a vertex with |psi| = {r:.3e}"));
        }
    }
    for r in &d.regions {
        if !r.consistent {
            regions.fail(format!("region at {} changes signature between samples", fmt_pt(r.sample)));
        }
    }

    match d.function.parse::<Poly2>() {
        Ok(poly) => {
            let f = GeneratingFunction::new(poly, "diagram");
            side_checks(d, &f, &mut admiss, &mut trans);
        }
        Err(e) => {
            admiss.fail(format!("function text does not parse: {e}"));
            trans.fail(format!("function text does not parse: {e}"));
        }
    }

    if d.regions.iter().any(|r| r.signature.chars().any(|ch| ch == 'D')) {
        regions.notes.push("some region samples are degenerate".into());
    }
    ValidationReport {
        checks: vec![excl, same, admiss, triple, trans, closure, resid, regions],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::{CurveEnd, DiagramSettings, SaddlePair, ScanStats};
    use crate::caustic::CausticCurve;
    use crate::flow::Branch;
    use crate::geom::pt;

    fn straight(pair: SaddlePair, from: Point, to: Point, source: Point, target: Point) -> BifurcationCurve {
        let dir = (target - source).normalize();
        let vertices = (0..=10)
            .map(|k| StratumVertex {
                x: from + (to - from) * (k as f64 / 10.0),
                psi: 0.0,
                source,
                target,
                source_dir: dir,
                target_dir: -dir,
            })
            .collect();
        BifurcationCurve {
            pair,
            vertices,
            ends: [CurveEnd::WindowExit, CurveEnd::WindowExit],
        }
    }

    fn fixture(strata: Vec<BifurcationCurve>) -> BifurcationDiagram {
        BifurcationDiagram {
            function: "y1^2 + y2^2".into(),
            base: Window::square(pt(0.0, 0.0), 1.0, 16).unwrap(),
            fiber: Window::square(pt(0.0, 0.0), 3.0, 16).unwrap(),
            settings: DiagramSettings::default(),
            caustic: CausticCurve::empty(),
            strata,
            codim2_points: Vec::new(),
            regions: Vec::new(),
            stats: ScanStats::default(),
            report: ValidationReport::default(),
            warnings: Vec::new(),
        }
    }

    fn pair(i: usize, j: usize) -> SaddlePair {
        SaddlePair::new(i, Branch::UnstablePlus, j, Branch::StableMinus)
    }

    #[test]
    fn opposite_connections_fail_exclusion() {
        let (s1, s2) = (pt(-1.0, 0.0), pt(1.0, 0.0));
        let d = fixture(vec![
            straight(pair(0, 1), pt(-0.5, 0.0), pt(0.5, 0.0), s1, s2),
            straight(pair(1, 0), pt(0.0, -0.5), pt(0.0, 0.5), s2, s1),
        ]);
        let r = validate_diagram(&d);
        let excl = r.check("exclusion").unwrap();
        assert!(!excl.passed);
        assert!(!excl.witnesses.is_empty());
    }

    #[test]
    fn disjoint_opposite_connections_pass_exclusion() {
        let (s1, s2) = (pt(-1.0, 0.0), pt(1.0, 0.0));
        let d = fixture(vec![
            straight(pair(0, 1), pt(-0.5, -0.5), pt(0.5, -0.5), s1, s2),
            straight(pair(1, 0), pt(-0.5, 0.5), pt(0.5, 0.5), s2, s1),
        ]);
        assert!(validate_diagram(&d).check("exclusion").unwrap().passed);
    }

    #[test]
    fn three_curves_through_a_point_fail() {
        let s = [pt(-1.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.5), pt(0.0, -1.5)];
        let d = fixture(vec![
            straight(pair(0, 1), pt(-0.5, 0.0), pt(0.5, 0.0), s[0], s[1]),
            straight(pair(2, 3), pt(0.0, -0.5), pt(0.0, 0.5), s[2], s[3]),
            straight(pair(2, 1), pt(-0.5, -0.5), pt(0.5, 0.5), s[2], s[1]),
        ]);
        assert!(!validate_diagram(&d).check("triple-connection").unwrap().passed);
    }

    #[test]
    fn large_residual_fails() {
        let mut c = straight(pair(0, 1), pt(-0.5, 0.0), pt(0.5, 0.0), pt(-1.0, 0.0), pt(1.0, 0.0));
        c.vertices[3].psi = 1e-3;
        let d = fixture(vec![c]);
        assert!(!validate_diagram(&d).check("residual").unwrap().passed);
    }

    #[test]
    fn signature_removal_drops_branches() {
        let mut s = Signature::default();
        s.limits = vec![(0, Branch::UnstablePlus, crate::flow::Limit::WindowExit)];
        s.exit_order = vec![vec![(0, Branch::UnstablePlus)], vec![(1, Branch::StablePlus)]];
        s.kinds = vec![crate::flow::CriticalKind::Saddle; 2];
        let w = without(&s, &[(0, Branch::UnstablePlus)]);
        assert!(w.limits.is_empty());
        assert_eq!(w.exit_order, vec![vec![(1, Branch::StablePlus)]]);
    }
}

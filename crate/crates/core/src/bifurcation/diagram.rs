//! Assembly of bifurcation diagrams from a base-plane scan.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::continuation::{locate_on_segment, trace_curve, BifurcationCurve};
use super::splitting::{splitting, SaddlePair};
use super::tracking::{match_along, TrackContext};
use super::validate::{curve_intersections, validate_diagram, ValidationReport};
use super::DiagramSettings;
use crate::caustic::{caustic, CausticCurve, Window};
use crate::field::GeneratingFunction;
use crate::flow::{portrait, Branch, BranchRef, CriticalKind, PhasePortrait, Signature};
use crate::geom::{pt, segment_crosses_polyline, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub sample: Point,
    /// Label-free signature.
    pub signature: String,
    /// Signature in the labels of the representative sample.
    pub labeled_signature: String,
    pub samples: usize,
    /// Whether three samples spread over the region share the signature.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codim2Point {
    pub x: Point,
    pub first: SaddlePair,
    pub second: SaddlePair,
    /// Indices into the strata list.
    pub curves: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanStats {
    pub samples: usize,
    pub masked_near_caustic: usize,
    pub on_caustic: usize,
    pub index_mismatches: usize,
    pub max_steps_hits: usize,
    pub max_monotonicity_violation: f64,
    /// Samples whose portrait shows both `(i, j)` and `(j, i)` connections,
    /// plus located zeros where the reversed pair also vanishes.
    pub exclusion_violations: usize,
    /// Samples with three or more simultaneous connections.
    pub triple_connections: usize,
    pub differing_edges: usize,
    pub located_zeros: usize,
    pub max_bracket: f64,
    /// Scan edges whose signature change no candidate pair explained.
    pub unresolved_edges: Vec<(Point, Point)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    /// Generating function as polynomial text.
    pub function: String,
    pub base: Window,
    pub fiber: Window,
    pub settings: DiagramSettings,
    pub caustic: CausticCurve,
    pub strata: Vec<BifurcationCurve>,
    pub codim2_points: Vec<Codim2Point>,
    pub regions: Vec<Region>,
    pub stats: ScanStats,
    pub report: ValidationReport,
    pub warnings: Vec<String>,
}

fn find(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
}

/// Branches whose limit or escape group differs between two signatures
/// expressed in the same labels.
pub(crate) fn changed_branches(a: &Signature, b: &Signature) -> BTreeSet<BranchRef> {
    let mut out = BTreeSet::new();
    for &(id, br, lim) in &a.limits {
        let other = b.limits.iter().find(|(i, bb, _)| *i == id && *bb == br).map(|t| t.2);
        if other != Some(lim) {
            out.insert((id, br));
        }
    }
    let group_of = |sig: &Signature, r: BranchRef| sig.exit_order.iter().find(|g| g.contains(&r)).cloned();
    for g in &a.exit_order {
        for &r in g {
            if group_of(b, r).as_ref() != Some(g) {
                out.insert(r);
            }
        }
    }
    out
}

fn candidate_pairs(changed: &BTreeSet<BranchRef>, cps: &[crate::flow::CriticalPoint]) -> Vec<SaddlePair> {
    let saddles: Vec<usize> = cps.iter().filter(|c| c.kind == CriticalKind::Saddle).map(|c| c.id).collect();
    let mut out = BTreeSet::new();
    for &(id, br) in changed {
        for &other in saddles.iter().filter(|&&s| s != id) {
            if br.is_unstable() {
                for bs in [Branch::StablePlus, Branch::StableMinus] {
                    out.insert(SaddlePair::new(id, br, other, bs));
                }
            } else {
                for bu in [Branch::UnstablePlus, Branch::UnstableMinus] {
                    out.insert(SaddlePair::new(other, bu, id, br));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Whether a located zero repeats an already traced curve: close to one of
/// its vertices with the same connecting saddles and branches.
fn already_traced(strata: &[BifurcationCurve], ctx: &TrackContext, pair: &SaddlePair, radius: f64) -> bool {
    let si = &ctx.cps[pair.from];
    let sj = &ctx.cps[pair.to];
    let (su, ss) = (pair.from_branch.direction(si), pair.to_branch.direction(sj));
    let sep = (si.position - sj.position).norm();
    strata.iter().any(|c| {
        c.vertices.iter().any(|v| {
            (v.x - ctx.x).norm() < radius
                && (v.source - si.position).norm() < 0.25 * sep
                && (v.target - sj.position).norm() < 0.25 * sep
                && v.source_dir.dot(&su) > 0.0
                && v.target_dir.dot(&ss) > 0.0
        })
    })
}

fn crosses_strata(strata: &[BifurcationCurve], a: Point, b: Point) -> bool {
    strata.iter().any(|c| segment_crosses_polyline(a, b, &c.path()))
}

/// Caustic, scan, strata, codimension-2 points, regions and validation.
pub fn assemble_diagram(
    f: &GeneratingFunction,
    base: &Window,
    fiber: &Window,
    settings: &DiagramSettings,
) -> BifurcationDiagram {
    let mut warnings = Vec::new();
    let locus_window = fiber.with_resolution([settings.locus_resolution.max(16); 2]);
    let caustic = caustic(f, &locus_window, &settings.caustic);
    warnings.extend(caustic.warnings.iter().cloned());

    let n = settings.grid.max(2);
    if n < 16 {
        warnings.push(format!(
            "scan grid {n} is coarser than 16 per axis; expect unresolved boundaries"
        ));
    }
    let lo = base.min();
    let span = base.max() - lo;
    let xs: Vec<Point> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            lo + pt(span.x * (i as f64 + 0.5) / n as f64, span.y * (j as f64 + 0.5) / n as f64)
        })
        .collect();
    let masked: Vec<bool> = xs
        .par_iter()
        .map(|&x| caustic.distance(x) < settings.caustic_margin)
        .collect();
    let portraits: Vec<Option<PhasePortrait>> = xs
        .par_iter()
        .zip(masked.par_iter())
        .map(|(&x, &m)| (!m).then(|| portrait(f, x, fiber, &settings.flow)))
        .collect();

    let mut stats = ScanStats {
        samples: xs.len(),
        masked_near_caustic: masked.iter().filter(|&&m| m).count(),
        ..ScanStats::default()
    };
    for p in portraits.iter().flatten() {
        if p.on_caustic {
            stats.on_caustic += 1;
            continue;
        }
        if p.index_consistent == Some(false) {
            stats.index_mismatches += 1;
        }
        stats.max_steps_hits += p.max_steps_hit;
        stats.max_monotonicity_violation = stats.max_monotonicity_violation.max(p.max_monotonicity_violation);
        if p.connections.iter().any(|&(i, j)| p.connections.contains(&(j, i))) {
            stats.exclusion_violations += 1;
        }
        if p.connections.len() >= 3 {
            stats.triple_connections += 1;
        }
    }
    let valid = |k: usize| portraits[k].as_ref().filter(|p| !p.on_caustic);

    // Scan edges: equal signatures join regions, differing ones are bracketed.
    let mut parent: Vec<usize> = (0..xs.len()).collect();
    let mut differing = Vec::new();
    for k in 0..xs.len() {
        let (i, j) = (k % n, k / n);
        let mut nbrs = Vec::new();
        if i + 1 < n {
            nbrs.push(k + 1);
        }
        if j + 1 < n {
            nbrs.push(k + n);
        }
        for m in nbrs {
            let (Some(a), Some(b)) = (valid(k), valid(m)) else {
                continue;
            };
            if caustic.crosses_segment(a.x, b.x) {
                continue;
            }
            let Some(mt) = match_along(f, a.x, &a.critical_points, b.x, &b.critical_points, fiber, &settings.flow)
            else {
                if a.critical_points.len() == b.critical_points.len() {
                    stats.unresolved_edges.push((a.x, b.x));
                }
                continue;
            };
            let rel = b.signature.relabel(&mt.map, &mt.flips);
            if rel == a.signature {
                union(&mut parent, k, m);
            } else {
                differing.push((k, m, changed_branches(&a.signature, &rel)));
            }
        }
    }
    stats.differing_edges = differing.len();

    let mut strata: Vec<BifurcationCurve> = Vec::new();
    let mut unexplained = Vec::new();
    let cell = span.x.max(span.y) / n as f64;
    for (k, m, changed) in &differing {
        let a = valid(*k).unwrap();
        let b = valid(*m).unwrap();
        if crosses_strata(&strata, a.x, b.x) {
            continue;
        }
        let mut explained = false;
        let ctx0 = TrackContext::new(a.x, a.critical_points.clone());
        for pair in candidate_pairs(changed, &a.critical_points) {
            let ns = settings.bracket_samples.max(2);
            let mut samples: Vec<(Point, Option<f64>, Option<TrackContext>)> = Vec::with_capacity(ns);
            let mut ctx = ctx0.clone();
            for s in 0..ns {
                let x = a.x + (b.x - a.x) * (s as f64 / (ns - 1) as f64);
                let (sample, next) = splitting(f, x, &pair, &ctx, fiber, &settings.flow);
                if let Some(c) = &next {
                    ctx = c.clone();
                }
                samples.push((x, sample.value, next));
            }
            for w in samples.windows(2) {
                let (Some(v0), Some(v1), Some(c0)) = (w[0].1, w[1].1, w[0].2.as_ref()) else {
                    continue;
                };
                if (v0 > 0.0) == (v1 > 0.0) {
                    continue;
                }
                let Ok(Some(found)) = locate_on_segment(f, w[0].0, w[1].0, &pair, c0, &caustic, fiber, settings)
                else {
                    continue;
                };
                explained = true;
                stats.located_zeros += 1;
                stats.max_bracket = stats.max_bracket.max(found.bracket);
                // The reversed connection must not vanish at the same point.
                for bu in [Branch::UnstablePlus, Branch::UnstableMinus] {
                    for bs in [Branch::StablePlus, Branch::StableMinus] {
                        let rev = pair.reversed(bu, bs);
                        let s = super::splitting_in(f, &found.context, &rev, fiber, &settings.flow);
                        if s.value.is_some_and(|v| v.abs() <= settings.psi) {
                            stats.exclusion_violations += 1;
                        }
                    }
                }
                if already_traced(&strata, &found.context, &pair, 2.0 * cell) {
                    continue;
                }
                let curve = trace_curve(f, &found, &pair, &caustic, base, fiber, settings);
                strata.push(curve);
            }
        }
        if !explained {
            unexplained.push((a.x, b.x));
        }
    }
    // Curves traced from later edges may explain earlier ones.
    stats
        .unresolved_edges
        .extend(unexplained.into_iter().filter(|&(a, b)| !crosses_strata(&strata, a, b)));
    if !stats.unresolved_edges.is_empty() {
        warnings.push(format!(
            "{} scan edges with unresolved signature changes",
            stats.unresolved_edges.len()
        ));
    }

    let mut codim2_points = Vec::new();
    for p in 0..strata.len() {
        for q in p + 1..strata.len() {
            for c in curve_intersections(&strata[p], &strata[q]) {
                codim2_points.push(Codim2Point {
                    x: c.x,
                    first: strata[p].pair,
                    second: strata[q].pair,
                    curves: (p, q),
                });
            }
        }
    }

    // Regions: connected components of equal signatures.
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for k in 0..xs.len() {
        if valid(k).is_some() {
            members.entry(find(&mut parent, k)).or_default().push(k);
        }
    }
    let regions: Vec<Region> = members
        .values()
        .map(|ks| {
            let pick = [ks[0], ks[ks.len() / 2], ks[ks.len() - 1]];
            let sigs: Vec<String> = pick.iter().map(|&k| valid(k).unwrap().signature.canonical()).collect();
            let rep = valid(ks[0]).unwrap();
            Region {
                sample: rep.x,
                signature: sigs[0].clone(),
                labeled_signature: rep.signature.to_string(),
                samples: ks.len(),
                consistent: sigs.iter().all(|s| *s == sigs[0]),
            }
        })
        .collect();

    let mut d = BifurcationDiagram {
        function: f.poly().to_string(),
        base: *base,
        fiber: *fiber,
        settings: *settings,
        caustic,
        strata,
        codim2_points,
        regions,
        stats,
        report: ValidationReport::default(),
        warnings,
    };
    d.report = validate_diagram(&d);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::{locate_on_segment, CurveEnd};
    use crate::caustic::Window;
    use crate::field::{elliptic_slice, GeneratingFunction};
    use crate::flow::Branch;
    use crate::geom::pt;

    #[test]
    fn quadratic_has_one_region_and_no_strata() {
        let f = GeneratingFunction::new("y1^2 - y2^2/2 + y1*y2/4".parse().unwrap(), "quadratic");
        let base = Window::square(pt(0.0, 0.0), 1.0, 16).unwrap();
        let fiber = Window::square(pt(0.0, 0.0), 6.0, 16).unwrap();
        let settings = DiagramSettings {
            grid: 16,
            ..DiagramSettings::default()
        };
        let d = assemble_diagram(&f, &base, &fiber, &settings);
        assert!(d.strata.is_empty());
        assert_eq!(d.regions.len(), 1, "{:?}", d.regions);
        assert!(d.caustic.components.is_empty());
        assert!(d.report.passed(), "{}", d.report);
    }

    #[test]
    fn elliptic_slice_diagram() {
        let f = elliptic_slice(1.0);
        let base = Window::square(pt(-0.6, 0.0), 1.2, 16).unwrap();
        let fiber = Window::square(pt(-0.5, 0.0), 4.0, 16).unwrap();
        let settings = DiagramSettings {
            grid: 24,
            ..DiagramSettings::default()
        };
        let d = assemble_diagram(&f, &base, &fiber, &settings);
        assert_eq!(d.strata.len(), 3, "{:?}", d.strata.iter().map(|c| c.pair).collect::<Vec<_>>());
        for c in &d.strata {
            assert!(c.max_residual() <= 1e-6);
            assert!(c.ends.contains(&CurveEnd::CausticContact));
        }
        assert!(d.stats.max_bracket <= 1e-10);
        assert_eq!(d.stats.exclusion_violations, 0);
        assert!(d.report.passed(), "{}", d.report);
        // Four large regions: the interior and three outer sectors.
        let big: Vec<_> = d.regions.iter().filter(|r| r.samples > 10).collect();
        assert_eq!(big.len(), 4, "{:?}", d.regions);
    }

    #[test]
    fn located_zero_is_small() {
        let f = elliptic_slice(1.0);
        let fiber = Window::square(pt(-0.5, 0.0), 4.0, 16).unwrap();
        let settings = DiagramSettings::default();
        let caustic = crate::caustic::caustic(&f, &fiber.with_resolution([128, 128]), &settings.caustic);
        // The axis ray x2 = 0, x1 > 0 carries a connection.
        let (x0, x1) = (pt(0.3, -0.01), pt(0.3, 0.01));
        let p = crate::flow::portrait(&f, x0, &fiber, &settings.flow);
        let ctx = TrackContext::new(x0, p.critical_points.clone());
        let q = crate::flow::portrait(&f, x1, &fiber, &settings.flow);
        let m = match_along(&f, x0, &p.critical_points, x1, &q.critical_points, &fiber, &settings.flow).unwrap();
        let changed = changed_branches(&p.signature, &q.signature.relabel(&m.map, &m.flips));
        let mut found = None;
        for pair in candidate_pairs(&changed, &p.critical_points) {
            if let Ok(Some(z)) = locate_on_segment(&f, x0, x1, &pair, &ctx, &caustic, &fiber, &settings) {
                found = Some(z);
            }
        }
        let z = found.expect("a zero on the segment");
        assert!(z.value.abs() <= 1e-8);
        assert!(z.bracket <= 1e-10);
        assert!(z.x.y.abs() < 1e-8);
    }

    #[test]
    fn changed_branches_reports_moved_exits() {
        let mut a = Signature::default();
        a.kinds = vec![CriticalKind::Saddle; 2];
        a.exit_order = vec![
            vec![(0, Branch::UnstablePlus), (1, Branch::UnstablePlus)],
            vec![(1, Branch::UnstableMinus)],
        ];
        let mut b = a.clone();
        b.exit_order = vec![
            vec![(1, Branch::UnstablePlus)],
            vec![(0, Branch::UnstablePlus), (1, Branch::UnstableMinus)],
        ];
        let c = changed_branches(&a, &b);
        assert!(c.contains(&(0, Branch::UnstablePlus)));
        assert!(candidate_pairs(&c, &[]).is_empty());
    }
}

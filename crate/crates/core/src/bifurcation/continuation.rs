//! Zeros of the splitting function: bisection on segments and
//! pseudo-arclength continuation of the zero curves.

use serde::{Deserialize, Serialize};

use super::splitting::{splitting, SaddlePair, SplittingSample};
use super::tracking::TrackContext;
use super::DiagramSettings;
use crate::caustic::{CausticCurve, Window};
use crate::error::{Error, Result};
use crate::field::GeneratingFunction;
use crate::geom::{perp, pt, Point};

/// A located zero of the splitting function.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub x: Point,
    pub value: f64,
    /// Width of the final bracket.
    pub bracket: f64,
    pub context: TrackContext,
}

fn invalid_err(s: &SplittingSample) -> Error {
    Error::InvalidSplitting {
        x1: s.x.x,
        x2: s.x.y,
        reason: s.reason.clone().unwrap_or_default(),
    }
}

/// Bisection for a zero of the splitting function on `[x0, x1]`.
///
/// `Ok(None)` when the end values have the same sign or the bracket closes on
/// a jump rather than a zero.
#[allow(clippy::too_many_arguments)]
pub fn locate_on_segment(
    f: &GeneratingFunction,
    x0: Point,
    x1: Point,
    pair: &SaddlePair,
    ctx: &TrackContext,
    caustic: &CausticCurve,
    fiber: &Window,
    settings: &DiagramSettings,
) -> Result<Option<Located>> {
    if (x1 - x0).norm() == 0.0 {
        return Err(Error::InvalidInput("degenerate segment: x0 = x1".into()));
    }
    if caustic.crosses_segment(x0, x1) {
        return Err(Error::InvalidInput("segment crosses the caustic".into()));
    }
    let tol = &settings.flow;
    let (s0, c0) = splitting(f, x0, pair, ctx, fiber, tol);
    let v0 = s0.value.ok_or_else(|| invalid_err(&s0))?;
    let c0 = c0.unwrap();
    let (s1, c1) = splitting(f, x1, pair, &c0, fiber, tol);
    let v1 = s1.value.ok_or_else(|| invalid_err(&s1))?;
    if v0 == 0.0 {
        return Ok(Some(Located {
            x: x0,
            value: 0.0,
            bracket: 0.0,
            context: c0,
        }));
    }
    if (v0 > 0.0) == (v1 > 0.0) && v1 != 0.0 {
        return Ok(None);
    }
    let (mut a, mut b) = (x0, x1);
    let (mut va, mut ctx_a) = (v0, c0);
    let mut best = (x1, v1, c1.unwrap());
    while (b - a).norm() > settings.bracket {
        let m = 0.5 * (a + b);
        let (s, c) = splitting(f, m, pair, &ctx_a, fiber, tol);
        let vm = s.value.ok_or_else(|| invalid_err(&s))?;
        let c = c.unwrap();
        if vm == 0.0 {
            best = (m, vm, c);
            a = m;
            b = m;
            break;
        }
        if (vm > 0.0) == (va > 0.0) {
            a = m;
            va = vm;
            ctx_a = c.clone();
        } else {
            b = m;
        }
        best = (m, vm, c);
    }
    let bracket = (b - a).norm();
    let m = 0.5 * (a + b);
    let (s, c) = splitting(f, m, pair, &best.2, fiber, tol);
    let (x, value, context) = match (s.value, c) {
        (Some(v), Some(c)) if v.abs() <= best.1.abs() => (m, v, c),
        _ => best,
    };
    if value.abs() > settings.psi {
        return Ok(None);
    }
    Ok(Some(Located {
        x,
        value,
        bracket,
        context,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveEnd {
    CausticContact,
    WindowExit,
    /// The corrector failed, typically where another stratum crosses.
    StratumIntersection,
    /// The splitting gradient vanished: the curve folds.
    Fold,
    /// The curve closed on itself.
    Closed,
    /// Vertex budget exhausted.
    Budget,
}

/// One vertex of a bifurcation curve together with the saddles and branch
/// directions that connect there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumVertex {
    pub x: Point,
    pub psi: f64,
    pub source: Point,
    pub target: Point,
    /// Direction of the connecting unstable branch at `source`.
    pub source_dir: Point,
    /// Direction of the connecting stable branch at `target`.
    pub target_dir: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    /// Labels refer to the critical points of the portrait at the seed.
    pub pair: SaddlePair,
    pub vertices: Vec<StratumVertex>,
    /// End reasons at the first and last vertex.
    pub ends: [CurveEnd; 2],
}

impl BifurcationCurve {
    pub fn path(&self) -> Vec<Point> {
        let mut p: Vec<Point> = self.vertices.iter().map(|v| v.x).collect();
        if self.ends[1] == CurveEnd::Closed && p.len() > 2 {
            p.push(p[0]);
        }
        p
    }

    pub fn max_residual(&self) -> f64 {
        self.vertices.iter().map(|v| v.psi.abs()).fold(0.0, f64::max)
    }
}

fn vertex(ctx: &TrackContext, pair: &SaddlePair, psi: f64) -> StratumVertex {
    let si = &ctx.cps[pair.from];
    let sj = &ctx.cps[pair.to];
    StratumVertex {
        x: ctx.x,
        psi,
        source: si.position,
        target: sj.position,
        source_dir: pair.from_branch.direction(si),
        target_dir: pair.to_branch.direction(sj),
    }
}

struct Evaluator<'a> {
    f: &'a GeneratingFunction,
    pair: SaddlePair,
    fiber: &'a Window,
    settings: &'a DiagramSettings,
}

impl Evaluator<'_> {
    fn value(&self, x: Point, ctx: &TrackContext) -> Option<(f64, TrackContext)> {
        let (s, c) = splitting(self.f, x, &self.pair, ctx, self.fiber, &self.settings.flow);
        Some((s.value?, c?))
    }

    fn gradient(&self, ctx: &TrackContext) -> Option<Point> {
        let h = self.settings.fd_step;
        let x = ctx.x;
        let d = |e: Point| -> Option<f64> {
            let (p, _) = self.value(x + e * h, ctx)?;
            let (m, _) = self.value(x - e * h, ctx)?;
            Some((p - m) / (2.0 * h))
        };
        Some(pt(d(pt(1.0, 0.0))?, d(pt(0.0, 1.0))?))
    }
}

/// Corrector failures close to the caustic come from critical points merging
/// there, not from another stratum.
fn failure_end(caustic: &CausticCurve, x: Point, s: &DiagramSettings) -> CurveEnd {
    if caustic.distance(x) < 5.0 * s.step_max {
        CurveEnd::CausticContact
    } else {
        CurveEnd::StratumIntersection
    }
}

/// Follows the zero curve from `start` in direction `sign` (±1 along
/// `perp(∇ψ)`).
fn follow(
    ev: &Evaluator<'_>,
    start: &Located,
    sign: f64,
    caustic: &CausticCurve,
    base: &Window,
) -> (Vec<StratumVertex>, CurveEnd) {
    let s = ev.settings;
    let mut out = Vec::new();
    let mut ctx = start.context.clone();
    let Some(mut g) = ev.gradient(&ctx) else {
        return (out, CurveEnd::StratumIntersection);
    };
    if g.norm() < 1e-12 {
        return (out, CurveEnd::Fold);
    }
    let mut tangent = perp(g).normalize() * sign;
    let mut step = 0.5 * (s.step_min + s.step_max);
    let mut travelled = 0.0;
    let end = loop {
        if out.len() >= s.max_curve_vertices {
            break CurveEnd::Budget;
        }
        let predicted = ctx.x + tangent * step;
        if !base.contains(predicted) {
            break CurveEnd::WindowExit;
        }
        if caustic.distance(predicted) < s.caustic_margin {
            break CurveEnd::CausticContact;
        }
        if caustic.crosses_segment(ctx.x, predicted) {
            step *= 0.5;
            if step < s.step_min {
                break CurveEnd::CausticContact;
            }
            continue;
        }
        // Newton along the normal, with a secant slope update.
        let normal = g.normalize();
        let mut slope = g.norm();
        let mut xn = predicted;
        let mut last: Option<(f64, f64)> = None;
        let mut offset = 0.0;
        let mut accepted = None;
        for it in 0..10 {
            let Some((v, c)) = ev.value(xn, &ctx) else {
                break;
            };
            if v.abs() <= s.corrector {
                accepted = Some((v, c, it));
                break;
            }
            if let Some((po, pv)) = last {
                if (v - pv).abs() > 0.0 && offset != po {
                    let sec = (v - pv) / (offset - po);
                    if sec.is_finite() && sec.abs() > 1e-3 * g.norm() {
                        slope = sec;
                    }
                }
            }
            last = Some((offset, v));
            offset -= v / slope;
            if offset.abs() > step {
                break;
            }
            xn = predicted + normal * offset;
        }
        let Some((v, c, iterations)) = accepted else {
            step *= 0.5;
            if step < s.step_min {
                break failure_end(caustic, ctx.x, s);
            }
            continue;
        };
        let Some(g_new) = ev.gradient(&c) else {
            step *= 0.5;
            if step < s.step_min {
                break CurveEnd::StratumIntersection;
            }
            continue;
        };
        if g_new.norm() < 1e-12 {
            if step > s.step_min {
                step = (0.5 * step).max(s.step_min);
                continue;
            }
            break CurveEnd::Fold;
        }
        travelled += (c.x - ctx.x).norm();
        ctx = c;
        g = g_new;
        let t = perp(g).normalize();
        tangent = if t.dot(&tangent) >= 0.0 { t } else { -t };
        out.push(vertex(&ctx, &ev.pair, v));
        if travelled > 3.0 * step && (ctx.x - start.x).norm() < 0.75 * step {
            break CurveEnd::Closed;
        }
        if iterations <= 2 {
            step = (1.5 * step).min(s.step_max);
        } else if iterations >= 5 {
            step = (0.5 * step).max(s.step_min);
        }
    };
    (out, end)
}

/// Traces the zero curve of the splitting function through `seed` in both
/// directions.
#[allow(clippy::too_many_arguments)]
pub fn trace_curve(
    f: &GeneratingFunction,
    seed: &Located,
    pair: &SaddlePair,
    caustic: &CausticCurve,
    base: &Window,
    fiber: &Window,
    settings: &DiagramSettings,
) -> BifurcationCurve {
    let ev = Evaluator {
        f,
        pair: *pair,
        fiber,
        settings,
    };
    let (fwd, end_fwd) = follow(&ev, seed, 1.0, caustic, base);
    let first = vertex(&seed.context, pair, seed.value);
    if end_fwd == CurveEnd::Closed {
        let mut vertices = vec![first];
        vertices.extend(fwd);
        // The last vertex duplicates the seed up to a step.
        vertices.pop();
        return BifurcationCurve {
            pair: *pair,
            vertices,
            ends: [CurveEnd::Closed, CurveEnd::Closed],
        };
    }
    let (bwd, end_bwd) = follow(&ev, seed, -1.0, caustic, base);
    let mut vertices: Vec<StratumVertex> = bwd.into_iter().rev().collect();
    vertices.push(first);
    vertices.extend(fwd);
    BifurcationCurve {
        pair: *pair,
        vertices,
        ends: [end_bwd, end_fwd],
    }
}

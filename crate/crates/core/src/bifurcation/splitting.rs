//! Signed separatrix-splitting function.
//!
//! For an ordered pair of saddles `(i, j)` with a chosen unstable branch of
//! `i` and stable branch of `j`, the section is a short segment crossing the
//! stable branch of `j` a little upstream of `j`, parallel to `j`'s unstable
//! direction. The splitting value is the offset along that segment between
//! the crossing of `i`'s unstable branch and the crossing of `j`'s stable
//! branch. It vanishes exactly when the two branches coincide.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::tracking::TrackContext;
use crate::caustic::Window;
use crate::field::GeneratingFunction;
use crate::flow::{delta0, nearest_distance, trace, Branch, CriticalKind, FlowTolerances, Section};
use crate::geom::Point;

/// Ordered saddle pair together with the branch selection: unstable branch
/// `from_branch` of saddle `from` against stable branch `to_branch` of `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SaddlePair {
    pub from: usize,
    pub from_branch: Branch,
    pub to: usize,
    pub to_branch: Branch,
}

impl SaddlePair {
    pub fn new(from: usize, from_branch: Branch, to: usize, to_branch: Branch) -> Self {
        Self {
            from,
            from_branch,
            to,
            to_branch,
        }
    }

    pub fn reversed(&self, from_branch: Branch, to_branch: Branch) -> Self {
        Self::new(self.to, from_branch, self.from, to_branch)
    }
}

impl fmt::Display for SaddlePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}{}>s{}{}", self.from, self.from_branch, self.to, self.to_branch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingSample {
    pub x: Point,
    pub pair: SaddlePair,
    /// `None` when a branch misses the section or tracking failed.
    pub value: Option<f64>,
    pub section: Option<Section>,
    pub reason: Option<String>,
}

impl SplittingSample {
    pub fn is_valid(&self) -> bool {
        self.value.is_some()
    }
}

/// Section radius around the target saddle, relative to its distance to the
/// nearest other critical point.
const SECTION_FRACTION: f64 = 0.2;

fn section_for(ctx: &TrackContext, pair: &SaddlePair) -> Section {
    let sj = &ctx.cps[pair.to];
    let rho = SECTION_FRACTION * nearest_distance(sj, &ctx.cps).min(5.0);
    let b = pair.to_branch.direction(sj);
    Section {
        origin: sj.position + b * rho,
        along: sj.unstable_direction(),
        normal: b,
        half_length: 2.0 * rho,
    }
}

/// Splitting value for a context already advanced to its base point.
pub fn splitting_in(
    f: &GeneratingFunction,
    ctx: &TrackContext,
    pair: &SaddlePair,
    fiber: &Window,
    tol: &FlowTolerances,
) -> SplittingSample {
    let x = ctx.x;
    let invalid = |reason: &str, section: Option<Section>| SplittingSample {
        x,
        pair: *pair,
        value: None,
        section,
        reason: Some(reason.to_string()),
    };
    let (Some(si), Some(sj)) = (ctx.cps.get(pair.from), ctx.cps.get(pair.to)) else {
        return invalid("unknown saddle label", None);
    };
    if pair.from == pair.to || si.kind != CriticalKind::Saddle || sj.kind != CriticalKind::Saddle {
        return invalid("pair does not name two distinct saddles", None);
    }
    if !pair.from_branch.is_unstable() || pair.to_branch.is_unstable() {
        return invalid("pair must select an unstable and a stable branch", None);
    }
    let sec = section_for(ctx, pair);
    let cps = &ctx.cps;

    let start_i = si.position + pair.from_branch.direction(si) * delta0(si, cps, tol);
    let ti = trace(f, x, cps, si.id, start_i, true, fiber, tol, Some(&sec), false);
    let Some(oi) = ti.section_offset else {
        return invalid("unstable branch misses the section", Some(sec));
    };

    let back = Section {
        normal: -sec.normal,
        ..sec
    };
    let start_j = sj.position + pair.to_branch.direction(sj) * delta0(sj, cps, tol);
    let tj = trace(f, x, cps, sj.id, start_j, false, fiber, tol, Some(&back), false);
    let Some(oj) = tj.section_offset else {
        return invalid("stable branch misses the section", Some(sec));
    };

    SplittingSample {
        x,
        pair: *pair,
        value: Some(oi - oj),
        section: Some(sec),
        reason: None,
    }
}

/// Splitting value at `x`, with saddle labels carried over from `ctx` by
/// continuation. Also returns the advanced context.
pub fn splitting(
    f: &GeneratingFunction,
    x: Point,
    pair: &SaddlePair,
    ctx: &TrackContext,
    fiber: &Window,
    tol: &FlowTolerances,
) -> (SplittingSample, Option<TrackContext>) {
    match ctx.advance(f, x, fiber, tol) {
        Some(next) => (splitting_in(f, &next, pair, fiber, tol), Some(next)),
        None => (
            SplittingSample {
                x,
                pair: *pair,
                value: None,
                section: None,
                reason: Some("saddle tracking lost".into()),
            },
            None,
        ),
    }
}

//! Integration of saddle separatrices of `dy/dt = ∇f_x`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ode::{StepControl, Stepper};
use super::roots::{CriticalKind, CriticalPoint};
use super::FlowTolerances;
use crate::caustic::Window;
use crate::field::GeneratingFunction;
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "u+")]
    UnstablePlus,
    #[serde(rename = "u-")]
    UnstableMinus,
    #[serde(rename = "s+")]
    StablePlus,
    #[serde(rename = "s-")]
    StableMinus,
}

impl Branch {
    pub const ALL: [Branch; 4] = [
        Branch::UnstablePlus,
        Branch::UnstableMinus,
        Branch::StablePlus,
        Branch::StableMinus,
    ];

    pub fn is_unstable(self) -> bool {
        matches!(self, Branch::UnstablePlus | Branch::UnstableMinus)
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::UnstablePlus | Branch::StablePlus => 1.0,
            _ => -1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::UnstablePlus => Branch::UnstableMinus,
            Branch::UnstableMinus => Branch::UnstablePlus,
            Branch::StablePlus => Branch::StableMinus,
            Branch::StableMinus => Branch::StablePlus,
        }
    }

    /// Direction of the branch at its saddle.
    pub fn direction(self, saddle: &CriticalPoint) -> Point {
        let e = if self.is_unstable() {
            saddle.unstable_direction()
        } else {
            saddle.stable_direction()
        };
        e * self.sign()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::UnstablePlus => "u+",
            Branch::UnstableMinus => "u-",
            Branch::StablePlus => "s+",
            Branch::StableMinus => "s-",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    Node(usize),
    Saddle(usize),
    WindowExit,
    MaxSteps,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Node(id) => write!(f, "n{id}"),
            Limit::Saddle(id) => write!(f, "s{id}"),
            Limit::WindowExit => f.write_str("exit"),
            Limit::MaxSteps => f.write_str("max-steps"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub saddle_id: usize,
    pub branch: Branch,
    pub trajectory: Vec<Point>,
    pub limit: Limit,
    /// Perimeter parameter of the exit point, for window exits.
    pub exit_parameter: Option<f64>,
    /// Polar angle around the window centre where the trajectory, continued
    /// past the window, reaches the escape circle. Orders exits the way they
    /// are ordered at infinity.
    pub escape_angle: Option<f64>,
    /// Polar angle around the limit node of the capture point.
    pub arrival_angle: Option<f64>,
    /// Largest per-step decrease of `f_x` in the direction of the flow.
    pub monotonicity_violation: f64,
    pub steps: usize,
}

/// Segment transversal to the flow; a trajectory crosses it when it passes
/// from the positive to the non-positive side of `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub origin: Point,
    /// Unit vector along the segment.
    pub along: Point,
    /// Unit normal.
    pub normal: Point,
    pub half_length: f64,
}

pub(crate) struct TraceOutcome {
    pub points: Vec<Point>,
    pub limit: Limit,
    pub exit_parameter: Option<f64>,
    pub escape_angle: Option<f64>,
    pub arrival_angle: Option<f64>,
    pub violation: f64,
    pub steps: usize,
    /// Signed offset along the section, if it was crossed.
    pub section_offset: Option<f64>,
}

/// Offset used to seed a branch off its saddle.
pub fn delta0(saddle: &CriticalPoint, cps: &[CriticalPoint], tol: &FlowTolerances) -> f64 {
    tol.delta0 * nearest_distance(saddle, cps).min(1.0)
}

/// Distance from `c` to the nearest other critical point (infinite if alone).
pub fn nearest_distance(c: &CriticalPoint, cps: &[CriticalPoint]) -> f64 {
    cps.iter()
        .filter(|o| o.id != c.id)
        .map(|o| (o.position - c.position).norm())
        .fold(f64::INFINITY, f64::min)
}

fn exit_point(w: &Window, inside: Point, outside: Point) -> Point {
    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if w.contains(m) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Continues a trajectory that left `w` until it reaches a circle around the
/// window centre several times its circumradius.
fn escape<F: Fn(Point) -> Point>(stepper: &mut Stepper<F>, w: &Window, budget: usize) -> f64 {
    let c = 0.5 * (w.min() + w.max());
    let radius = 4.0 * (w.max() - c).norm();
    let mut y = stepper.y;
    for _ in 0..budget {
        if (y - c).norm() >= radius {
            break;
        }
        let Some(step) = stepper.step(f64::INFINITY) else {
            break;
        };
        y = step.to;
    }
    let d = y - c;
    d.y.atan2(d.x)
}

/// Integrates from `start` along `+∇f_x` (`forward`) or `-∇f_x` until a
/// limit is reached, or until `section` is crossed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn trace(
    f: &GeneratingFunction,
    x: Point,
    cps: &[CriticalPoint],
    origin_id: usize,
    start: Point,
    forward: bool,
    w: &Window,
    tol: &FlowTolerances,
    section: Option<&Section>,
    keep_points: bool,
) -> TraceOutcome {
    let sigma = if forward { 1.0 } else { -1.0 };
    let rhs = move |y: Point| (f.gradient(y) - x) * sigma;
    let fx = |y: Point| f.eval(y) - x.dot(&y);
    let control = StepControl {
        rel_tol: tol.rel_tol,
        abs_tol: tol.abs_tol,
        ..StepControl::default()
    };
    let others: Vec<&CriticalPoint> = cps.iter().filter(|c| c.id != origin_id).collect();
    let cos_align = tol.align_deg.to_radians().cos();

    let mut stepper = Stepper::new(rhs, start, 1e-3, control);
    let mut points = Vec::new();
    if keep_points {
        points.push(start);
    }
    let mut value = fx(start);
    let mut violation: f64 = 0.0;
    let mut steps = 0;
    let finish = |points, limit, exit_parameter, arrival_angle, violation, steps, section_offset| TraceOutcome {
        points,
        limit,
        exit_parameter,
        escape_angle: None,
        arrival_angle,
        violation,
        steps,
        section_offset,
    };

    loop {
        if steps >= tol.max_steps {
            return finish(points, Limit::MaxSteps, None, None, violation, steps, None);
        }
        let y = stepper.y;
        let d_near = others
            .iter()
            .map(|c| (c.position - y).norm())
            .fold(f64::INFINITY, f64::min);
        let speed = stepper.slope().norm();
        let h_max = if d_near.is_finite() && speed > 0.0 {
            0.25 * d_near / speed
        } else {
            f64::INFINITY
        };
        let Some(step) = stepper.step(h_max) else {
            return finish(points, Limit::MaxSteps, None, None, violation, steps, None);
        };
        steps += 1;
        let to = step.to;
        if keep_points {
            points.push(to);
        }
        let v = fx(to);
        violation = violation.max(-(sigma * (v - value)));
        value = v;

        if let Some(sec) = section {
            let g = |p: Point| sec.normal.dot(&(p - sec.origin));
            if g(step.from) > 0.0 && g(to) <= 0.0 {
                let hit = stepper.locate(step.from, step.h, g);
                let offset = sec.along.dot(&(hit - sec.origin));
                if offset.abs() <= sec.half_length {
                    return finish(points, Limit::MaxSteps, None, None, violation, steps, Some(offset));
                }
            }
        }

        for c in &others {
            let rel = to - c.position;
            let r_to = rel.norm();
            if r_to >= tol.capture {
                continue;
            }
            match c.kind {
                CriticalKind::Saddle => {
                    let e = if forward { c.stable_direction() } else { c.unstable_direction() };
                    if (rel / r_to).dot(&e).abs() >= cos_align {
                        return finish(points, Limit::Saddle(c.id), None, None, violation, steps, None);
                    }
                }
                _ => {
                    let angle = rel.y.atan2(rel.x);
                    return finish(points, Limit::Node(c.id), None, Some(angle), violation, steps, None);
                }
            }
        }

        if !w.contains(to) {
            let p = exit_point(w, step.from, to);
            if keep_points {
                *points.last_mut().unwrap() = p;
            }
            let param = w.perimeter_parameter(p);
            let mut out = finish(points, Limit::WindowExit, Some(param), None, violation, steps, None);
            if section.is_none() {
                out.escape_angle = Some(escape(&mut stepper, w, tol.max_steps));
            }
            return out;
        }
    }
}

/// Four branches per saddle, saddles in id order, branches in
/// `u+, u-, s+, s-` order.
pub fn separatrices(
    f: &GeneratingFunction,
    x: Point,
    cps: &[CriticalPoint],
    w: &Window,
    tol: &FlowTolerances,
) -> Vec<Separatrix> {
    let mut out = Vec::new();
    for s in cps.iter().filter(|c| c.kind == CriticalKind::Saddle) {
        let d0 = delta0(s, cps, tol);
        for branch in Branch::ALL {
            let start = s.position + branch.direction(s) * d0;
            let t = trace(f, x, cps, s.id, start, branch.is_unstable(), w, tol, None, true);
            out.push(Separatrix {
                saddle_id: s.id,
                branch,
                trajectory: t.points,
                limit: t.limit,
                exit_parameter: t.exit_parameter,
                escape_angle: t.escape_angle,
                arrival_angle: t.arrival_angle,
                monotonicity_violation: t.violation,
                steps: t.steps,
            });
        }
    }
    out
}

//! Dormand–Prince 5(4) stepper for autonomous planar fields.

use crate::geom::Point;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error weights: 5th-order minus embedded 4th-order solution.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_min: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            h_min: 1e-14,
        }
    }
}

/// One explicit step of size `h`; returns the new point and the error estimate.
pub fn dp_step<F: Fn(Point) -> Point>(rhs: &F, y: Point, k1: Point, h: f64) -> (Point, Point, Point) {
    let k2 = rhs(y + k1 * (h * A21));
    let k3 = rhs(y + (k1 * A31 + k2 * A32) * h);
    let k4 = rhs(y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
    let k5 = rhs(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
    let k6 = rhs(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
    let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
    let k7 = rhs(y_new);
    let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    (y_new, err, k7)
}

/// Adaptive integrator state (FSAL: the last stage is reused as the next first stage).
pub struct Stepper<F: Fn(Point) -> Point> {
    rhs: F,
    pub y: Point,
    pub t: f64,
    k1: Point,
    h: f64,
    control: StepControl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub from: Point,
    pub to: Point,
    pub h: f64,
}

impl<F: Fn(Point) -> Point> Stepper<F> {
    pub fn new(rhs: F, y0: Point, h0: f64, control: StepControl) -> Self {
        let k1 = rhs(y0);
        Self {
            rhs,
            y: y0,
            t: 0.0,
            k1,
            h: h0,
            control,
        }
    }

    pub fn rhs(&self, y: Point) -> Point {
        (self.rhs)(y)
    }

    pub fn slope(&self) -> Point {
        self.k1
    }

    /// Takes one accepted step no longer than `h_max`; `None` if the step size
    /// underflows.
    pub fn step(&mut self, h_max: f64) -> Option<Step> {
        let mut h = self.h.min(h_max).max(self.control.h_min);
        loop {
            let (y_new, err, k7) = dp_step(&self.rhs, self.y, self.k1, h);
            let scale = |a: f64, b: f64| self.control.abs_tol + self.control.rel_tol * a.abs().max(b.abs());
            let e = (err.x / scale(self.y.x, y_new.x))
                .abs()
                .max((err.y / scale(self.y.y, y_new.y)).abs());
            if e.is_finite() && e <= 1.0 {
                let from = self.y;
                self.y = y_new;
                self.t += h;
                self.k1 = k7;
                let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = h * grow;
                return Some(Step { from, to: y_new, h });
            }
            let shrink = if e.is_finite() { (0.9 * e.powf(-0.25)).clamp(0.1, 0.5) } else { 0.1 };
            h *= shrink;
            if h < self.control.h_min {
                return None;
            }
        }
    }

    /// Locates `g = 0` inside the last accepted step by secant/bisection on
    /// the step length from `from` (which must have slope `k_from`).
    pub fn locate(&self, from: Point, h: f64, g: impl Fn(Point) -> f64) -> Point {
        let k_from = (self.rhs)(from);
        let at = |s: f64| dp_step(&self.rhs, from, k_from, s).0;
        let (mut lo, mut hi) = (0.0, h);
        let (mut glo, mut ghi) = (g(from), g(at(h)));
        if glo == 0.0 {
            return from;
        }
        let mut best = at(h);
        for it in 0..80 {
            // Alternate secant and bisection (Illinois-style safeguard).
            let s = if it % 3 == 2 || (ghi - glo).abs() < 1e-300 {
                0.5 * (lo + hi)
            } else {
                let s = hi - ghi * (hi - lo) / (ghi - glo);
                if s <= lo || s >= hi { 0.5 * (lo + hi) } else { s }
            };
            best = at(s);
            let gs = g(best);
            if gs == 0.0 || (hi - lo) <= 1e-15 * h.abs().max(1e-300) {
                break;
            }
            if (gs > 0.0) == (glo > 0.0) {
                lo = s;
                glo = gs;
            } else {
                hi = s;
                ghi = gs;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::pt;

    #[test]
    fn exponential_decay_is_accurate() {
        let mut s = Stepper::new(|y: Point| -y, pt(1.0, 2.0), 0.1, StepControl::default());
        while s.t < 3.0 {
            let remaining = 3.0 - s.t;
            s.step(remaining).unwrap();
        }
        let e = (-3.0f64).exp();
        assert!((s.y - pt(e, 2.0 * e)).norm() < 1e-9);
    }

    #[test]
    fn rotation_preserves_radius() {
        let mut s = Stepper::new(|y: Point| pt(-y.y, y.x), pt(1.0, 0.0), 0.1, StepControl::default());
        while s.t < 2.0 * std::f64::consts::PI {
            let remaining = 2.0 * std::f64::consts::PI - s.t;
            s.step(remaining).unwrap();
        }
        assert!((s.y - pt(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn locate_finds_crossing() {
        let mut s = Stepper::new(|_y: Point| pt(1.0, 0.0), pt(0.0, 0.0), 1.0, StepControl::default());
        let step = s.step(1.0).unwrap();
        let p = s.locate(step.from, step.h, |y| y.x - 0.37);
        assert!((p.x - 0.37).abs() < 1e-14);
    }
}

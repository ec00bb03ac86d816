use std::fmt::Write;

use lagmap::caustic::{CausticCurve, Window};
use lagmap::Point;

const STYLE: &str = "
.frame { fill: #fcfcfa; stroke: #999; stroke-width: 1; }
.caustic { fill: none; stroke: #b2182b; stroke-width: 2; }
.cusp { fill: #b2182b; }
.degenerate { fill: none; stroke: #b2182b; stroke-width: 2; }
.stratum { fill: none; stroke: #2166ac; stroke-width: 1.5; }
.codim2 { fill: #1b7837; }
.sample { fill: #777; }
.unstable { fill: none; stroke: #d6604d; stroke-width: 1.2; }
.stable { fill: none; stroke: #4393c3; stroke-width: 1.2; }
.saddle { fill: #333; }
.unstable-node { fill: #d6604d; }
.stable-node { fill: #4393c3; }
.degenerate-point { fill: #fdb863; }
text { font: 12px sans-serif; fill: #333; }
";

/// A drawing in window coordinates on a fixed view box.
pub struct Canvas {
    lo: Point,
    hi: Point,
    width: f64,
    height: f64,
    body: String,
}

impl Canvas {
    pub fn new(w: &Window) -> Self {
        let (lo, hi) = (w.min(), w.max());
        let width = 1000.0;
        let height = (width * (hi.y - lo.y) / (hi.x - lo.x)).round();
        let mut c = Self {
            lo,
            hi,
            width,
            height,
            body: String::new(),
        };
        let _ = writeln!(c.body, r#"<rect class="frame" x="0" y="0" width="{width}" height="{height}"/>"#);
        c
    }

    fn map(&self, p: Point) -> (f64, f64) {
        let u = (p.x - self.lo.x) / (self.hi.x - self.lo.x) * self.width;
        let v = (self.hi.y - p.y) / (self.hi.y - self.lo.y) * self.height;
        (u, v)
    }

    pub fn polyline(&mut self, points: &[Point], class: &str) {
        if points.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (k, &p) in points.iter().enumerate() {
            let (u, v) = self.map(p);
            let _ = write!(d, "{}{u:.2},{v:.2}", if k == 0 { "" } else { " " });
        }
        let _ = writeln!(self.body, r#"<polyline class="{class}" points="{d}"/>"#);
    }

    pub fn dot(&mut self, p: Point, r: f64, class: &str, title: Option<&str>) {
        let (u, v) = self.map(p);
        match title {
            Some(t) => {
                let _ = writeln!(
                    self.body,
                    r#"<circle class="{class}" cx="{u:.2}" cy="{v:.2}" r="{r}"><title>{}</title></circle>"#,
                    escape(t)
                );
            }
            None => {
                let _ = writeln!(self.body, r#"<circle class="{class}" cx="{u:.2}" cy="{v:.2}" r="{r}"/>"#);
            }
        }
    }

    pub fn label(&mut self, p: Point, text: &str) {
        let (u, v) = self.map(p);
        let _ = writeln!(self.body, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, u + 4.0, v - 4.0, escape(text));
    }

    pub fn caustic(&mut self, c: &CausticCurve) {
        for comp in &c.components {
            self.polyline(&comp.path(), "caustic");
        }
        for &p in &c.cusp_points {
            self.dot(p, 4.0, "cusp", Some("cusp"));
        }
        for &p in &c.degenerate_points {
            self.dot(p, 5.0, "degenerate", Some("non-Morse"));
        }
    }

    pub fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" width=\"{w}\" height=\"{h}\">\n<title>{t}</title>\n<style>{STYLE}</style>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            t = escape(title),
            body = self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use lagmap::pt;

    #[test]
    fn maps_window_to_view_box() {
        let w = Window::new(pt(0.0, 0.0), [2.0, 1.0], [16, 16]).unwrap();
        let mut c = Canvas::new(&w);
        assert_eq!(c.map(pt(-2.0, 1.0)), (0.0, 0.0));
        assert_eq!(c.map(pt(2.0, -1.0)), (1000.0, 500.0));
        c.polyline(&[pt(0.0, 0.0), pt(1.0, 0.5)], "stratum");
        c.label(pt(0.0, 0.0), "s0u+>s1s-");
        let s = c.finish("t");
        assert!(s.contains(r#"class="stratum""#));
        assert!(s.contains("&gt;"));
        assert!(s.contains("viewBox=\"0 0 1000 500\""));
    }
}

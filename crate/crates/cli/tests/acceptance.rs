//! End-to-end acceptance checks. Run with `--nocapture` to see one line per
//! criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lagmap::bifurcation::{
    assemble_diagram, splitting_in, validate_diagram, BifurcationCurve, BifurcationDiagram, CurveEnd, DiagramSettings,
    SaddlePair, ScanStats, StratumVertex, TrackContext, ValidationReport,
};
use lagmap::caustic::{caustic, critical_locus, pyramid_slices, CausticCurve, CausticTolerances, Window};
use lagmap::field::elliptic_slice;
use lagmap::flow::{portrait, solve_critical_points, Branch, CriticalKind, CriticalPoint, FlowTolerances};
use lagmap::{pt, GeneratingFunction, NormalForm, Perturbation, Point, QuadraticPerturbation};
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn timed(limit: Option<f64>, run: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = run();
    let secs = start.elapsed().as_secs_f64();
    o.detail = format!("{}; {secs:.2} s", o.detail);
    if let Some(limit) = limit {
        if secs >= limit {
            o.passed = false;
            o.detail = format!("{} (limit {limit} s)", o.detail);
        }
    }
    o
}

fn elliptic(q: QuadraticPerturbation) -> GeneratingFunction {
    NormalForm::EllipticUmbilic
        .generating_function()
        .perturb(&Perturbation::Quadratic(q))
}

fn hyperbolic(q: QuadraticPerturbation) -> GeneratingFunction {
    NormalForm::HyperbolicUmbilic
        .generating_function()
        .perturb(&Perturbation::Quadratic(q))
}

/// Algebraic least-squares circle through the points: centre and radius.
fn fit_circle(points: &[Point]) -> (Point, f64) {
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for p in points {
        let row = Vector3::new(p.x, p.y, 1.0);
        let z = -(p.x * p.x + p.y * p.y);
        m += row * row.transpose();
        rhs += row * z;
    }
    let s = m.lu().solve(&rhs).expect("well-posed fit");
    let centre = pt(-s[0] / 2.0, -s[1] / 2.0);
    let r = (centre.norm_squared() - s[2]).sqrt();
    (centre, r)
}

fn circle_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = Window::square(pt(0.0, 0.0), 1.5, 64).unwrap();
    let tol = CausticTolerances::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, c) = loop {
            let (a, c): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if (a + c).abs() > 0.1 {
                break (a, c);
            }
        };
        let eps = rng.gen_range(0.01..0.5);
        let b = rng.gen_range(-2.0..2.0);
        let locus = critical_locus(&elliptic(QuadraticPerturbation::new(eps, a, b, c).unwrap()), &w, &tol);
        if locus.components.len() != 1 || !locus.components[0].closed {
            return Outcome::new(
                false,
                format!("eps={eps} a={a} b={b} c={c}: {} components", locus.components.len()),
            );
        }
        let (centre, r) = fit_circle(&locus.components[0].points);
        let expected = pt(-eps / 4.0 * (a - c), eps / 4.0 * b);
        let err = (centre - expected).norm().max((r - eps / 4.0 * (a + c).abs()).abs());
        worst = worst.max(err);
    }
    Outcome::new(worst <= 1e-6, format!("20 circles, worst centre/radius error {worst:.1e}"))
}

fn tricuspoid() -> Outcome {
    let ts = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0];
    let mut all = ts.to_vec();
    all.push(0.0);
    let slices = pyramid_slices(&all, &CausticTolerances::default());
    let mut ok = true;
    let mut parts = Vec::new();
    for (t, c) in &slices {
        let good = if *t == 0.0 {
            c.degenerate_points.len() == 1 && c.cusp_count() == 0
        } else {
            c.cusp_count() == 3
        };
        ok &= good;
        parts.push(format!("t={t}: {}c/{}d", c.cusp_count(), c.degenerate_points.len()));
    }
    Outcome::new(ok, parts.join(", "))
}

fn distance_to_axes(p: Point) -> f64 {
    let to_x = if p.x >= 0.0 { p.y.abs() } else { p.norm() };
    let to_y = if p.y >= 0.0 { p.x.abs() } else { p.norm() };
    to_x.min(to_y)
}

fn hyperbolic_umbilic() -> Outcome {
    let tol = CausticTolerances::default();
    let w = Window::square(pt(0.0, 0.0), 2.0, 64).unwrap();
    let c = caustic(&NormalForm::HyperbolicUmbilic.generating_function(), &w, &tol);
    // The fiber window maps onto the axes up to x = 4.
    let mut hausdorff: f64 = 0.0;
    for comp in &c.components {
        for p in comp.path() {
            hausdorff = hausdorff.max(distance_to_axes(p));
        }
    }
    for k in 0..=400 {
        let s = 4.0 * k as f64 / 400.0;
        hausdorff = hausdorff.max(c.distance(pt(s, 0.0))).max(c.distance(pt(0.0, s)));
    }
    let q = QuadraticPerturbation::new(0.1, 0.3, 0.7, -0.2).unwrap();
    let p = caustic(&hyperbolic(q), &w, &tol);
    let ok = hausdorff <= 1e-6 && p.components.len() == 2 && p.cusp_count() == 1;
    Outcome::new(
        ok,
        format!(
            "Hausdorff {hausdorff:.1e}; perturbed: {} components, {} cusps",
            p.components.len(),
            p.cusp_count()
        ),
    )
}

/// Critical points of the t = 1 slice at `x` from the quartic in `y1`
/// obtained by eliminating `y2 = -x2 / (2 y1)`.
fn slice_oracle(x: Point) -> Vec<(Point, CriticalKind, f64)> {
    let t = 1.0;
    // Monic: y^4 + 2t y^3 - x1 y^2 - x2^2 / 4.
    let coeffs = [-x.y * x.y / 4.0, 0.0, -x.x, 2.0 * t];
    let mut companion = Matrix4::zeros();
    for i in 1..4 {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..4 {
        companion[(i, 3)] = -coeffs[i];
    }
    let grad = |y: Point| pt(y.x * y.x - y.y * y.y + 2.0 * t * y.x - x.x, -2.0 * y.x * y.y - x.y);
    let mut out = Vec::new();
    for z in companion.complex_eigenvalues().iter() {
        if z.im.abs() > 1e-6 || z.re.abs() < 1e-12 {
            continue;
        }
        let mut y = pt(z.re, -x.y / (2.0 * z.re));
        for _ in 0..20 {
            let j = nalgebra::Matrix2::new(2.0 * y.x + 2.0 * t, -2.0 * y.y, -2.0 * y.y, -2.0 * y.x);
            if let Some(step) = j.lu().solve(&grad(y)) {
                y -= step;
            }
        }
        if grad(y).norm() > 1e-9 {
            continue;
        }
        let (h11, h12, h22) = (2.0 * y.x + 2.0 * t, -2.0 * y.y, -2.0 * y.x);
        let det = h11 * h22 - h12 * h12;
        let kind = if det < 0.0 {
            CriticalKind::Saddle
        } else if h11 > 0.0 {
            CriticalKind::UnstableNode
        } else {
            CriticalKind::StableNode
        };
        out.push((y, kind, det.abs()));
    }
    out
}

fn census() -> Outcome {
    let f = elliptic_slice(1.0);
    let fiber = Window::new(pt(-0.5, 0.0), [4.0, 4.0], [128, 128]).unwrap();
    let inner = Window::new(pt(-0.5, 0.0), [3.9, 3.9], [16, 16]).unwrap();
    let tol = FlowTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut done, mut inside, mut outside) = (0, 0, 0);
    while done < 200 {
        // Every other draw comes from the box around the tricuspoid.
        let x = if done % 2 == 0 {
            pt(rng.gen_range(-1.2..0.1), rng.gen_range(-0.7..0.7))
        } else {
            pt(rng.gen_range(-1.8..0.6), rng.gen_range(-1.2..1.2))
        };
        let oracle = slice_oracle(x);
        // Stay off the caustic and keep every root clear of the window edge.
        if oracle.iter().any(|(y, _, det)| *det < 1e-3 || !inner.contains(*y)) {
            continue;
        }
        done += 1;
        let roots = solve_critical_points(&f, x, &fiber, &tol);
        let mut want: Vec<CriticalKind> = oracle.iter().map(|o| o.1).collect();
        let mut got: Vec<CriticalKind> = roots.points.iter().map(|c| c.kind).collect();
        want.sort();
        got.sort();
        let saddles = want.iter().filter(|k| **k == CriticalKind::Saddle).count();
        let expected_shape = match want.len() {
            4 => saddles == 3 && want.contains(&CriticalKind::UnstableNode),
            2 => saddles == 2,
            _ => false,
        };
        if want.len() == 4 {
            inside += 1;
        } else {
            outside += 1;
        }
        let signed: i32 = got.iter().map(|k| if *k == CriticalKind::Saddle { -1 } else { 1 }).sum();
        let close = oracle
            .iter()
            .all(|(y, _, _)| roots.points.iter().any(|c| (c.position - y).norm() < 1e-8));
        if want != got || !expected_shape || signed != -2 || roots.boundary_winding != Some(-2) || !close {
            return Outcome::new(
                false,
                format!("x=({}, {}): oracle {want:?}, solver {got:?}, winding {:?}", x.x, x.y, roots.boundary_winding),
            );
        }
    }
    Outcome::new(true, format!("200 points ({inside} with 4 roots, {outside} with 2), signed census -2"))
}

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

/// Two opposite connections between the same saddles meeting at the origin.
fn counterexample() -> BifurcationDiagram {
    let (s1, s2) = (pt(-1.0, 0.0), pt(1.0, 0.0));
    let forward = SaddlePair::new(0, Branch::UnstablePlus, 1, Branch::StableMinus);
    let backward = SaddlePair::new(1, Branch::UnstablePlus, 0, Branch::StableMinus);
    BifurcationDiagram {
        function: "y1^2 + y2^2".into(),
        base: Window::square(pt(0.0, 0.0), 1.0, 16).unwrap(),
        fiber: Window::square(pt(0.0, 0.0), 3.0, 16).unwrap(),
        settings: DiagramSettings::default(),
        caustic: CausticCurve::empty(),
        strata: vec![
            straight(forward, pt(-0.5, 0.0), pt(0.5, 0.0), s1, s2),
            straight(backward, pt(0.0, -0.5), pt(0.0, 0.5), s2, s1),
        ],
        codim2_points: Vec::new(),
        regions: Vec::new(),
        stats: ScanStats::default(),
        report: ValidationReport::default(),
        warnings: Vec::new(),
    }
}

fn exclusion(default: &BifurcationDiagram) -> Outcome {
    let settings = DiagramSettings {
        grid: 32,
        ..DiagramSettings::default()
    };
    let window = |c: [f64; 2], h: f64| Window::new(pt(c[0], c[1]), [h, h], [128, 128]).unwrap();
    let q = QuadraticPerturbation::new(0.1, 0.3, 0.7, -0.2).unwrap();
    let scans = [
        assemble_diagram(&elliptic_slice(0.5), &window([-0.15, 0.0], 0.3), &window([-0.25, 0.0], 2.0), &settings),
        assemble_diagram(
            &elliptic(QuadraticPerturbation::new(0.4, 1.0, 0.5, 0.5).unwrap()),
            &window([0.0, 0.0], 0.3),
            &window([0.0, 0.0], 2.0),
            &settings,
        ),
        assemble_diagram(&hyperbolic(q), &window([0.0, 0.0], 0.2), &window([0.0, 0.0], 2.0), &settings),
    ];
    let mut ok = true;
    let mut violations = 0;
    let all: Vec<&BifurcationDiagram> = std::iter::once(default).chain(scans.iter()).collect();
    for d in &all {
        violations += d.stats.exclusion_violations;
        ok &= d.stats.exclusion_violations == 0;
        ok &= d.report.check("exclusion").is_some_and(|c| c.passed);
        ok &= validate_diagram(d).check("exclusion").is_some_and(|c| c.passed);
    }
    let fixture = validate_diagram(&counterexample());
    let caught = fixture.check("exclusion").is_some_and(|c| !c.passed);
    Outcome::new(
        ok && caught,
        format!(
            "{} scans, {violations} samples with opposite connections; fixture {}",
            all.len(),
            if caught { "rejected" } else { "accepted" }
        ),
    )
}

fn branch_towards(saddle: &CriticalPoint, dir: Point, unstable: bool) -> Branch {
    let cands = if unstable {
        [Branch::UnstablePlus, Branch::UnstableMinus]
    } else {
        [Branch::StablePlus, Branch::StableMinus]
    };
    if cands[0].direction(saddle).dot(&dir) >= 0.0 {
        cands[0]
    } else {
        cands[1]
    }
}

fn nearest(cps: &[CriticalPoint], y: Point) -> Option<&CriticalPoint> {
    cps.iter()
        .filter(|c| c.kind == CriticalKind::Saddle)
        .min_by(|a, b| (a.position - y).norm().total_cmp(&(b.position - y).norm()))
}

/// Recomputes the splitting value at every stratum vertex from a fresh solve.
fn max_vertex_residual(d: &BifurcationDiagram) -> (f64, usize, usize) {
    let f = elliptic_slice(1.0);
    let tol = d.settings.flow;
    let (mut worst, mut count, mut failed) = (0.0f64, 0, 0);
    for s in &d.strata {
        for v in &s.vertices {
            count += 1;
            let roots = solve_critical_points(&f, v.x, &d.fiber, &tol);
            let (Some(a), Some(b)) = (nearest(&roots.points, v.source), nearest(&roots.points, v.target)) else {
                failed += 1;
                continue;
            };
            let pair = SaddlePair::new(
                a.id,
                branch_towards(a, v.source_dir, true),
                b.id,
                branch_towards(b, v.target_dir, false),
            );
            let ctx = TrackContext::new(v.x, roots.points.clone());
            match splitting_in(&f, &ctx, &pair, &d.fiber, &tol).value {
                Some(psi) => worst = worst.max(psi.abs()),
                None => failed += 1,
            }
        }
    }
    (worst, count, failed)
}

fn run_diagram(out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lagmap"))
        .args(["diagram", "--out"])
        .arg(out)
        .output()
        .expect("run lagmap")
}

fn load(path: &Path) -> BifurcationDiagram {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn splitting_consistency(first: &Path) -> Outcome {
    let r = run_diagram(first);
    if r.status.code() != Some(0) {
        return Outcome::new(false, format!("diagram exited with {:?}", r.status.code()));
    }
    let d = load(&first.join("diagram.json"));
    let stored = d.strata.iter().map(|s| s.max_residual()).fold(0.0, f64::max);
    let (fresh, count, failed) = max_vertex_residual(&d);
    let ok = stored <= 1e-6 && fresh <= 1e-6 && failed == 0 && d.stats.max_bracket <= 1e-10 && d.stats.located_zeros > 0;
    Outcome::new(
        ok,
        format!(
            "{} strata, {count} vertices, stored |psi| {stored:.1e}, recomputed {fresh:.1e} ({failed} failed), {} brackets max width {:.1e}",
            d.strata.len(),
            d.stats.located_zeros,
            d.stats.max_bracket
        ),
    )
}

fn morse_boundary(default: &BifurcationDiagram) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-4;
    let mut worst_g: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for form in NormalForm::ALL {
        let f = form.generating_function();
        for _ in 0..100 {
            let y = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (e1, e2) = (pt(h, 0.0), pt(0.0, h));
            let fd_g = pt(
                (f.eval(y + e1) - f.eval(y - e1)) / (2.0 * h),
                (f.eval(y + e2) - f.eval(y - e2)) / (2.0 * h),
            );
            let g = f.gradient(y);
            worst_g = worst_g.max((g - fd_g).norm() / g.norm().max(1.0));
            let c1 = (f.gradient(y + e1) - f.gradient(y - e1)) / (2.0 * h);
            let c2 = (f.gradient(y + e2) - f.gradient(y - e2)) / (2.0 * h);
            let fd_h = nalgebra::Matrix2::from_columns(&[c1, c2]);
            let hs = f.hessian(y);
            worst_h = worst_h.max((hs - fd_h).norm() / hs.norm().max(1.0));
        }
    }
    let f = elliptic_slice(1.0);
    let fiber = Window::new(pt(-0.5, 0.0), [4.0, 4.0], [128, 128]).unwrap();
    let mut mono = default.stats.max_monotonicity_violation;
    for _ in 0..40 {
        let x = pt(rng.gen_range(-1.8..0.6), rng.gen_range(-1.2..1.2));
        let p = portrait(&f, x, &fiber, &FlowTolerances::default());
        if !p.on_caustic {
            mono = mono.max(p.max_monotonicity_violation);
        }
    }
    let ok = worst_g <= 1e-6 && worst_h <= 1e-6 && mono <= 1e-10;
    Outcome::new(
        ok,
        format!("gradient {worst_g:.1e}, Hessian {worst_h:.1e} relative; f_x decrease per step {mono:.1e}"),
    )
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let r = run_diagram(second);
    if r.status.code() != Some(0) {
        return Outcome::new(false, format!("second run exited with {:?}", r.status.code()));
    }
    let a = std::fs::read(first.join("diagram.json")).unwrap();
    let b = std::fs::read(second.join("diagram.json")).unwrap();
    Outcome::new(a == b, format!("diagram.json {} bytes, identical: {}", a.len(), a == b))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("run1"), dir.path().join("run2"));
    let mut results = Vec::new();
    results.push(("critical circle", timed(Some(5.0), circle_formula)));
    results.push(("tricuspoid slices", timed(Some(5.0), tricuspoid)));
    results.push(("hyperbolic umbilic", timed(Some(5.0), hyperbolic_umbilic)));
    results.push(("critical-point census", timed(Some(30.0), census)));
    // The default diagram feeds criteria 5 to 8.
    let six = timed(Some(60.0), || splitting_consistency(&first));
    let default = first
        .join("diagram.json")
        .exists()
        .then(|| load(&first.join("diagram.json")));
    let five = match &default {
        Some(d) => timed(None, || exclusion(d)),
        None => Outcome::new(false, "default diagram missing"),
    };
    results.push(("exclusion", five));
    results.push(("splitting consistency", six));
    let seven = match &default {
        Some(d) => timed(None, || morse_boundary(d)),
        None => Outcome::new(false, "default diagram missing"),
    };
    results.push(("Morse boundary", seven));
    results.push(("determinism", timed(None, || determinism(&first, &second))));

    for (k, (name, o)) in results.iter().enumerate() {
        println!("[{}] {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

use std::fmt::Write;
use std::path::PathBuf;

use lagmap::bifurcation::{assemble_diagram, validate_diagram, BifurcationDiagram};
use lagmap::caustic::{caustic, pyramid_slices, CausticCurve, Window};
use lagmap::flow::{portrait, CriticalKind, PhasePortrait};
use lagmap::{pt, Point};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::svg::Canvas;
use crate::{Cli, CliError, Command};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    workers: usize,
    config: &'a RunConfig,
    files: Vec<String>,
}

#[derive(Serialize)]
struct CausticDoc<'a> {
    function: &'a str,
    window: &'a Window,
    fiber: &'a Window,
    cusp_count: usize,
    caustic: &'a CausticCurve,
}

#[derive(Serialize)]
struct PortraitDoc<'a> {
    function: &'a str,
    fiber: &'a Window,
    signature: String,
    canonical_signature: String,
    portrait: &'a PhasePortrait,
}

#[derive(Serialize)]
struct SliceDoc<'a> {
    t: f64,
    cusp_count: usize,
    degenerate_count: usize,
    caustic: &'a CausticCurve,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Validate { diagram } = &cli.command {
        return validate(cli, diagram.clone());
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let mut out = OutputDir::create(&cli.out)?;
    let (name, result) = match &cli.command {
        Command::Caustic => ("caustic", run_caustic(&cfg, &mut out)),
        Command::Portrait { x } => ("portrait", run_portrait(&cfg, x.as_deref(), &mut out)),
        Command::Diagram => ("diagram", run_diagram(&cfg, &mut out)),
        Command::Slices => ("slices", run_slices(&cfg, &mut out)),
        Command::Validate { .. } => unreachable!(),
    };
    // A failed config leaves nothing to record.
    if let Err(CliError::Config(_)) = result {
        return result;
    }
    write_manifest(cli, &cfg, name, &mut out)?;
    result
}

fn write_manifest(cli: &Cli, cfg: &RunConfig, command: &'static str, out: &mut OutputDir) -> Result<(), CliError> {
    let mut files = out.written.clone();
    files.push("manifest.json".into());
    let m = Manifest {
        tool: "lagmap",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cli.seed,
        workers: rayon::current_num_threads(),
        config: cfg,
        files,
    };
    out.write_json("manifest.json", &m)
}

fn run_caustic(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let f = cfg.generating_function()?;
    let base = cfg.window.window()?;
    let fiber = cfg.fiber.window()?;
    let c = caustic(&f, &fiber, &cfg.caustic);
    for w in &c.warnings {
        eprintln!("warning: {w}");
    }
    out.write_json(
        "caustic.json",
        &CausticDoc {
            function: f.label(),
            window: &base,
            fiber: &fiber,
            cusp_count: c.cusp_count(),
            caustic: &c,
        },
    )?;
    let mut canvas = Canvas::new(&base);
    canvas.caustic(&c);
    out.write("caustic.svg", &canvas.finish(&format!("caustic of {}", f.label())))?;
    println!(
        "caustic: {} components, {} cusps, {} non-Morse points",
        c.components.len(),
        c.cusp_count(),
        c.degenerate_points.len()
    );
    Ok(())
}

fn trajectories_csv(p: &PhasePortrait) -> String {
    let mut s = String::from("saddle,branch,step,y1,y2\n");
    for sep in &p.separatrices {
        for (k, q) in sep.trajectory.iter().enumerate() {
            let _ = writeln!(s, "{},{},{k},{:.12},{:.12}", sep.saddle_id, sep.branch, q.x, q.y);
        }
    }
    s
}

fn portrait_svg(p: &PhasePortrait, fiber: &Window, title: &str) -> String {
    let mut c = Canvas::new(fiber);
    for sep in &p.separatrices {
        let class = if sep.branch.is_unstable() { "unstable" } else { "stable" };
        c.polyline(&sep.trajectory, class);
    }
    for cp in &p.critical_points {
        let class = match cp.kind {
            CriticalKind::Saddle => "saddle",
            CriticalKind::UnstableNode => "unstable-node",
            CriticalKind::StableNode => "stable-node",
            CriticalKind::Degenerate => "degenerate-point",
        };
        c.dot(cp.position, 5.0, class, Some(&format!("{} {:?}", cp.id, cp.kind)));
        c.label(cp.position, &cp.id.to_string());
    }
    c.finish(title)
}

fn run_portrait(cfg: &RunConfig, x: Option<&[f64]>, out: &mut OutputDir) -> Result<(), CliError> {
    let f = cfg.generating_function()?;
    let fiber = cfg.fiber.window()?;
    let x = match x {
        Some(v) => pt(v[0], v[1]),
        None => pt(cfg.portrait.x[0], cfg.portrait.x[1]),
    };
    if !x.x.is_finite() || !x.y.is_finite() {
        return Err(CliError::Config("portrait point must be finite".into()));
    }
    let p = portrait(&f, x, &fiber, &cfg.flow);
    out.write_json(
        "portrait.json",
        &PortraitDoc {
            function: f.label(),
            fiber: &fiber,
            signature: p.signature.to_string(),
            canonical_signature: p.signature.canonical(),
            portrait: &p,
        },
    )?;
    out.write("trajectories.csv", &trajectories_csv(&p))?;
    let title = format!("gradient flow of {} at x = ({}, {})", f.label(), x.x, x.y);
    out.write("portrait.svg", &portrait_svg(&p, &fiber, &title))?;
    println!(
        "portrait at ({}, {}): {} critical points, {} connections",
        x.x,
        x.y,
        p.critical_points.len(),
        p.connections.len()
    );
    if p.index_consistent == Some(false) {
        eprintln!("warning: critical point indices do not match the boundary winding");
    }
    if p.on_caustic {
        return Err(CliError::OnCaustic);
    }
    Ok(())
}

fn diagram_svg(d: &BifurcationDiagram) -> String {
    let mut c = Canvas::new(&d.base);
    c.caustic(&d.caustic);
    for s in &d.strata {
        c.polyline(&s.path(), "stratum");
        if let Some(v) = s.vertices.get(s.vertices.len() / 2) {
            c.label(v.x, &s.pair.to_string());
        }
    }
    for p in &d.codim2_points {
        c.dot(p.x, 5.0, "codim2", Some(&format!("{} / {}", p.first, p.second)));
    }
    for r in &d.regions {
        c.dot(r.sample, 3.0, "sample", Some(&r.labeled_signature));
    }
    c.finish(&format!("bifurcation diagram of {}", d.function))
}

fn run_diagram(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let f = cfg.generating_function()?;
    let base = cfg.window.window()?;
    let fiber = cfg.fiber.window()?;
    let d = assemble_diagram(&f, &base, &fiber, &cfg.diagram_settings());
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    out.write_json("diagram.json", &d)?;
    out.write("diagram.svg", &diagram_svg(&d))?;
    out.write("report.txt", &d.report.to_string())?;
    println!(
        "diagram: {} strata, {} regions, {} codimension-2 points",
        d.strata.len(),
        d.regions.len(),
        d.codim2_points.len()
    );
    if d.report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}

fn run_slices(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    if cfg.slices.t.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Config("slices.t must be finite".into()));
    }
    let slices = pyramid_slices(&cfg.slices.t, &cfg.caustic);
    let docs: Vec<SliceDoc> = slices
        .iter()
        .map(|(t, c)| SliceDoc {
            t: *t,
            cusp_count: c.cusp_count(),
            degenerate_count: c.degenerate_points.len(),
            caustic: c,
        })
        .collect();
    out.write_json("slices.json", &docs)?;
    let half = cfg.slices.t.iter().fold(0.25, |h, t| f64::max(h, 1.25 * t.abs() + 0.25));
    let w = Window::square(Point::new(0.0, 0.0), half, 16).map_err(|e| CliError::Config(e.to_string()))?;
    let mut canvas = Canvas::new(&w);
    for (t, c) in &slices {
        canvas.caustic(c);
        if let Some(p) = c.components.first().and_then(|k| k.points.first()) {
            canvas.label(*p, &format!("t = {t}"));
        }
    }
    out.write("slices.svg", &canvas.finish("elliptic umbilic slices"))?;
    for d in &docs {
        println!("t = {}: {} cusps, {} non-Morse points", d.t, d.cusp_count, d.degenerate_count);
    }
    Ok(())
}

fn validate(cli: &Cli, path: Option<PathBuf>) -> Result<(), CliError> {
    let path = path.unwrap_or_else(|| cli.out.join("diagram.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let d: BifurcationDiagram =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let report = validate_diagram(&d);
    let mut out = OutputDir::create(&cli.out)?;
    out.write("report.txt", &report.to_string())?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}

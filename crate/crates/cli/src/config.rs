use std::path::Path;

use lagmap::bifurcation::DiagramSettings;
use lagmap::caustic::{CausticTolerances, Window};
use lagmap::field::{Perturbation, QuadraticPerturbation};
use lagmap::flow::FlowTolerances;
use lagmap::{pt, GeneratingFunction, NormalForm, Poly2};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub function: FunctionSpec,
    /// Base-plane window: caustic, diagram scan.
    pub window: WindowSpec,
    /// Fiber window: critical points and trajectories.
    pub fiber: WindowSpec,
    pub caustic: CausticTolerances,
    pub flow: FlowTolerances,
    pub portrait: PortraitOptions,
    pub diagram: DiagramOptions,
    pub slices: SliceOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            function: FunctionSpec::default(),
            window: WindowSpec {
                center: [-0.6, 0.0],
                half_widths: [1.2, 1.2],
                resolution: 128,
            },
            fiber: WindowSpec {
                center: [-0.5, 0.0],
                half_widths: [4.0, 4.0],
                resolution: 128,
            },
            caustic: CausticTolerances::default(),
            flow: FlowTolerances::default(),
            portrait: PortraitOptions::default(),
            diagram: DiagramOptions::default(),
            slices: SliceOptions::default(),
        }
    }
}

/// A normal form or polynomial, plus an optional perturbation. When the
/// section is absent the elliptic umbilic with `y1^2` added is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub form: Option<String>,
    pub polynomial: Option<String>,
    /// Polynomial text added to the function.
    pub perturbation: Option<String>,
    pub quadratic: Option<QuadraticSpec>,
}

impl Default for FunctionSpec {
    fn default() -> Self {
        Self {
            form: Some(NormalForm::EllipticUmbilic.name().to_string()),
            polynomial: None,
            perturbation: Some("y1^2".into()),
            quadratic: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
    pub resolution: usize,
}

impl WindowSpec {
    pub fn window(&self) -> Result<Window, CliError> {
        let c = pt(self.center[0], self.center[1]);
        Window::new(c, self.half_widths, [self.resolution; 2]).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitOptions {
    pub x: [f64; 2],
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self { x: [-0.25, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagramOptions {
    pub grid: usize,
    pub locus_resolution: usize,
    pub psi: f64,
    pub corrector: f64,
    pub bracket: f64,
    pub caustic_margin: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub fd_step: f64,
    pub max_curve_vertices: usize,
    pub bracket_samples: usize,
    pub closure_factor: f64,
    pub probe_offset: f64,
    pub raster: usize,
    /// Seed grid of the critical-point solver during scans.
    pub seed_grid: usize,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        let s = DiagramSettings::default();
        Self {
            grid: s.grid,
            locus_resolution: s.locus_resolution,
            psi: s.psi,
            corrector: s.corrector,
            bracket: s.bracket,
            caustic_margin: s.caustic_margin,
            step_min: s.step_min,
            step_max: s.step_max,
            fd_step: s.fd_step,
            max_curve_vertices: s.max_curve_vertices,
            bracket_samples: s.bracket_samples,
            closure_factor: s.closure_factor,
            probe_offset: s.probe_offset,
            raster: s.raster,
            seed_grid: s.flow.seed_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceOptions {
    pub t: Vec<f64>,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            t: vec![-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
        }
    }
}

/// Highest total degree accepted in user polynomials.
const MAX_DEGREE: u32 = 8;

fn parse_poly(text: &str, what: &str) -> Result<Poly2, CliError> {
    let p = text
        .parse::<Poly2>()
        .map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    if p.total_degree() > MAX_DEGREE {
        return Err(CliError::Config(format!(
            "{what}: total degree {} exceeds {MAX_DEGREE}",
            p.total_degree()
        )));
    }
    Ok(p)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn generating_function(&self) -> Result<GeneratingFunction, CliError> {
        let spec = &self.function;
        let base = match (&spec.form, &spec.polynomial) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "function: give either `form` or `polynomial`, not both".into(),
                ))
            }
            (Some(name), None) => name
                .parse::<NormalForm>()
                .map_err(|e| CliError::Config(format!("function.form: {e}")))?
                .generating_function(),
            (None, Some(text)) => GeneratingFunction::new(parse_poly(text, "function.polynomial")?, text.trim()),
            (None, None) => return Err(CliError::Config("function: missing `form` or `polynomial`".into())),
        };
        let mut f = base;
        if let Some(text) = &spec.perturbation {
            let p = parse_poly(text, "function.perturbation")?;
            f = f.perturb(&Perturbation::Poly(p));
        }
        if let Some(q) = spec.quadratic {
            let q = QuadraticPerturbation::new(q.eps, q.a, q.b, q.c)
                .map_err(|e| CliError::Config(format!("function.quadratic: {e}")))?;
            f = f.perturb(&Perturbation::Quadratic(q));
        }
        Ok(f)
    }

    pub fn diagram_settings(&self) -> DiagramSettings {
        let d = &self.diagram;
        DiagramSettings {
            flow: FlowTolerances {
                seed_grid: d.seed_grid,
                ..self.flow
            },
            caustic: self.caustic,
            grid: d.grid,
            locus_resolution: d.locus_resolution,
            psi: d.psi,
            corrector: d.corrector,
            bracket: d.bracket,
            caustic_margin: d.caustic_margin,
            step_min: d.step_min,
            step_max: d.step_max,
            fd_step: d.fd_step,
            max_curve_vertices: d.max_curve_vertices,
            bracket_samples: d.bracket_samples,
            closure_factor: d.closure_factor,
            probe_offset: d.probe_offset,
            raster: d.raster,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[window]\ncentre = [0.0, 0.0]\n").unwrap_err();
        assert!(err.to_string().contains("centre"), "{err}");
        let err = RunConfig::parse("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::parse("[diagram]\ngrid = 16\n[flow]\ncapture = 2e-4\n").unwrap();
        assert_eq!(c.diagram.grid, 16);
        assert_eq!(c.diagram.psi, DiagramOptions::default().psi);
        assert_eq!(c.flow.capture, 2e-4);
        assert_eq!(c.flow.rel_tol, FlowTolerances::default().rel_tol);
    }

    #[test]
    fn function_variants() {
        let c = RunConfig::parse("[function]\npolynomial = \"y1^3/3 + y2^3/3\"\n").unwrap();
        assert!(c.function.perturbation.is_none());
        let f = c.generating_function().unwrap();
        assert_eq!(f.gradient(pt(1.0, 2.0)), pt(1.0, 4.0));
        let c = RunConfig::parse("[function]\nform = \"hyperbolic-umbilic\"\n").unwrap();
        let f = c.generating_function().unwrap();
        assert_eq!(f.gradient(pt(1.0, 2.0)), pt(1.0, 4.0));
        let c = RunConfig::parse("[function]\nform = \"nope\"\n").unwrap();
        assert!(c.generating_function().is_err());
        let c = RunConfig::parse("[function]\npolynomial = \"y1^2 +\"\n").unwrap();
        assert!(matches!(c.generating_function(), Err(CliError::Config(_))));
        let c = RunConfig::parse("[function]\npolynomial = \"y1^5*y2^4\"\n").unwrap();
        let err = c.generating_function().unwrap_err();
        assert!(err.to_string().contains("degree 9"), "{err}");
    }
}

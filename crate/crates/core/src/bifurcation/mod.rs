//! Saddle-to-saddle bifurcations in the base plane: the signed splitting
//! function, its zero curves, full diagrams and their validation.
//!
//! Saddle labels are only meaningful locally. Curves carry the positions of
//! the connecting saddles and branch directions at every vertex, so checks
//! between curves compare saddles geometrically rather than by label.

mod continuation;
mod diagram;
mod splitting;
mod tracking;
mod validate;

use serde::{Deserialize, Serialize};

pub use continuation::{locate_on_segment, trace_curve, BifurcationCurve, CurveEnd, Located, StratumVertex};
pub use diagram::{assemble_diagram, BifurcationDiagram, Codim2Point, Region, ScanStats};
pub use splitting::{splitting, splitting_in, SaddlePair, SplittingSample};
pub use tracking::{match_along, match_points, max_jump, track, Matching, TrackContext};
pub use validate::{curve_intersections, validate_diagram, CheckResult, Crossing, ValidationReport};

use crate::caustic::CausticTolerances;
use crate::flow::FlowTolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagramSettings {
    pub flow: FlowTolerances,
    pub caustic: CausticTolerances,
    /// Samples per axis of the base-plane scan.
    pub grid: usize,
    /// Contouring resolution of the critical locus.
    pub locus_resolution: usize,
    /// Residual accepted on curve vertices and located zeros.
    pub psi: f64,
    /// Residual targeted by the continuation corrector.
    pub corrector: f64,
    /// Final bracket width of the bisection.
    pub bracket: f64,
    /// Samples and curves stay this far from the caustic.
    pub caustic_margin: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Finite-difference step for the splitting gradient.
    pub fd_step: f64,
    pub max_curve_vertices: usize,
    /// Splitting samples per scan edge when bracketing.
    pub bracket_samples: usize,
    /// Codimension-2 closure distance, in grid steps.
    pub closure_factor: f64,
    /// Offset of the portraits on either side of a curve, in grid steps.
    pub probe_offset: f64,
    /// Raster size of the connectivity test.
    pub raster: usize,
}

impl Default for DiagramSettings {
    fn default() -> Self {
        Self {
            flow: FlowTolerances {
                seed_grid: 12,
                ..FlowTolerances::default()
            },
            caustic: CausticTolerances::default(),
            grid: 64,
            locus_resolution: 128,
            psi: 1e-6,
            corrector: 1e-9,
            bracket: 1e-10,
            caustic_margin: 1e-3,
            step_min: 1e-3,
            step_max: 1e-2,
            fd_step: 1e-6,
            max_curve_vertices: 4000,
            bracket_samples: 5,
            closure_factor: 10.0,
            probe_offset: 0.25,
            raster: 256,
        }
    }
}

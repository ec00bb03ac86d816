//! Critical points of `f_x(y) = f(y) - x·y`, separatrices of the gradient
//! flow `dy/dt = ∇f_x` and combinatorial phase-portrait signatures.
//!
//! Under `+∇f_x` a point with Morse index 0 (both eigenvalues positive) is an
//! unstable node, index 1 a saddle and index 2 a stable node.

pub mod ode;
mod portrait;
mod roots;
mod separatrix;

use serde::{Deserialize, Serialize};

pub use portrait::{moduli_dimension, portrait, portraits, BranchRef, PhasePortrait, Signature};
pub(crate) use roots::{make_point, newton};
pub use roots::{classify, poincare_index, solve_critical_points, CriticalKind, CriticalPoint, RootSet};
pub use separatrix::{delta0, nearest_distance, separatrices, Branch, Limit, Section, Separatrix};
pub(crate) use separatrix::trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowTolerances {
    /// Residual `|∇f_x|` accepted at a critical point.
    pub root: f64,
    /// Eigenvalues below this mark a degenerate critical point.
    pub degenerate: f64,
    /// Roots closer than this are merged.
    pub dedupe: f64,
    /// Capture radius around a limit critical point.
    pub capture: f64,
    /// Alignment tolerance, in degrees, for a saddle capture.
    pub align_deg: f64,
    /// Seed offset of a separatrix, relative to the saddle's neighbourhood size.
    pub delta0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Newton seeds per axis.
    pub seed_grid: usize,
    /// Tolerated per-step decrease of `f_x` along the flow.
    pub monotone: f64,
}

impl Default for FlowTolerances {
    fn default() -> Self {
        Self {
            root: 1e-10,
            degenerate: 1e-7,
            dedupe: 1e-6,
            capture: 1e-4,
            align_deg: 5.0,
            delta0: 1e-5,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
            seed_grid: 16,
            monotone: 1e-10,
        }
    }
}

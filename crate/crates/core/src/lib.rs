//! Caustics, gradient phase portraits and separatrix bifurcation diagrams of
//! 2D Lagrangian maps given by polynomial generating functions.
//!
//! * [`field`]: generating functions, normal forms and perturbations.
//! * [`caustic`]: critical locus, caustic and fold/cusp labels.
//! * [`flow`]: critical points of `f_x = f - x·y`, separatrices, portraits.
//! * [`bifurcation`]: splitting function, curve tracing, diagrams, validation.

pub mod bifurcation;
pub mod caustic;
pub mod error;
pub mod field;
pub mod flow;
pub mod geom;
pub mod poly;

pub use error::{Error, Result};
pub use field::{GeneratingFunction, NormalForm, Perturbation, QuadraticPerturbation};
pub use geom::{pt, Point};
pub use poly::Poly2;

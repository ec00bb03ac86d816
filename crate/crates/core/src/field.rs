//! Generating functions of 2D Lagrangian maps.
//!
//! A generating function `f(y1, y2)` induces the Lagrangian map
//! `y ↦ ∇f(y)`, whose Jacobian is the Hessian of `f`. Derivatives are taken
//! formally once at construction and compiled for fast evaluation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{pt, Point};
use crate::poly::{powers, Compiled, Poly2, Var};

#[derive(Clone)]
pub struct GeneratingFunction {
    poly: Poly2,
    label: String,
    compiled: Arc<CompiledDerivatives>,
}

struct CompiledDerivatives {
    value: Compiled,
    d1: Compiled,
    d2: Compiled,
    d11: Compiled,
    d12: Compiled,
    d22: Compiled,
    max_i: usize,
    max_j: usize,
}

impl fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingFunction")
            .field("label", &self.label)
            .field("poly", &self.poly.to_string())
            .finish()
    }
}

const MAX_STACK_DEGREE: usize = 32;

impl GeneratingFunction {
    pub fn new(poly: Poly2, label: impl Into<String>) -> Self {
        let d1 = poly.derivative(Var::Y1);
        let d2 = poly.derivative(Var::Y2);
        let d11 = d1.derivative(Var::Y1);
        let d12 = d1.derivative(Var::Y2);
        let d22 = d2.derivative(Var::Y2);
        let value = Compiled::new(&poly);
        let (max_i, max_j) = value.max_degrees();
        assert!(
            max_i < MAX_STACK_DEGREE && max_j < MAX_STACK_DEGREE,
            "polynomial degree too large"
        );
        let compiled = CompiledDerivatives {
            value,
            d1: Compiled::new(&d1),
            d2: Compiled::new(&d2),
            d11: Compiled::new(&d11),
            d12: Compiled::new(&d12),
            d22: Compiled::new(&d22),
            max_i,
            max_j,
        };
        Self {
            poly,
            label: label.into(),
            compiled: Arc::new(compiled),
        }
    }

    pub fn poly(&self) -> &Poly2 {
        &self.poly
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn with_powers<R>(&self, y: Point, f: impl FnOnce(&CompiledDerivatives, &[f64], &[f64]) -> R) -> R {
        let c = &*self.compiled;
        let mut p1 = [0.0; MAX_STACK_DEGREE];
        let mut p2 = [0.0; MAX_STACK_DEGREE];
        powers(y.x, c.max_i, &mut p1);
        powers(y.y, c.max_j, &mut p2);
        f(c, &p1, &p2)
    }

    pub fn eval(&self, y: Point) -> f64 {
        self.with_powers(y, |c, p1, p2| c.value.eval_with(p1, p2))
    }

    /// The Lagrangian map `y ↦ (∂f/∂y1, ∂f/∂y2)`.
    pub fn gradient(&self, y: Point) -> Point {
        self.with_powers(y, |c, p1, p2| pt(c.d1.eval_with(p1, p2), c.d2.eval_with(p1, p2)))
    }

    pub fn hessian(&self, y: Point) -> Matrix2<f64> {
        self.with_powers(y, |c, p1, p2| {
            let h12 = c.d12.eval_with(p1, p2);
            Matrix2::new(c.d11.eval_with(p1, p2), h12, h12, c.d22.eval_with(p1, p2))
        })
    }

    /// Gradient and Hessian from one set of monomial powers.
    pub fn gradient_hessian(&self, y: Point) -> (Point, Matrix2<f64>) {
        self.with_powers(y, |c, p1, p2| {
            let h12 = c.d12.eval_with(p1, p2);
            (
                pt(c.d1.eval_with(p1, p2), c.d2.eval_with(p1, p2)),
                Matrix2::new(c.d11.eval_with(p1, p2), h12, h12, c.d22.eval_with(p1, p2)),
            )
        })
    }

    /// `det Hf` as a polynomial; its zero set is the critical locus.
    pub fn hessian_det_poly(&self) -> Poly2 {
        let d1 = self.poly.derivative(Var::Y1);
        let d2 = self.poly.derivative(Var::Y2);
        let d11 = d1.derivative(Var::Y1);
        let d12 = d1.derivative(Var::Y2);
        let d22 = d2.derivative(Var::Y2);
        &(&d11 * &d22) - &(&d12 * &d12)
    }

    pub fn perturb(&self, p: &Perturbation) -> GeneratingFunction {
        let extra = p.poly();
        let label = if extra.is_zero() {
            self.label.clone()
        } else {
            format!("{} + {}", self.label, p.describe())
        };
        GeneratingFunction::new(&self.poly + &extra, label)
    }
}

/// Built-in normal forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalForm {
    Fold,
    CuspPlus,
    CuspMinus,
    EllipticUmbilic,
    HyperbolicUmbilic,
}

impl NormalForm {
    pub const ALL: [NormalForm; 5] = [
        NormalForm::Fold,
        NormalForm::CuspPlus,
        NormalForm::CuspMinus,
        NormalForm::EllipticUmbilic,
        NormalForm::HyperbolicUmbilic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormalForm::Fold => "fold",
            NormalForm::CuspPlus => "cusp-plus",
            NormalForm::CuspMinus => "cusp-minus",
            NormalForm::EllipticUmbilic => "elliptic-umbilic",
            NormalForm::HyperbolicUmbilic => "hyperbolic-umbilic",
        }
    }

    pub fn poly(self) -> Poly2 {
        let third = 1.0 / 3.0;
        match self {
            // y1^3 stabilized by a non-degenerate quadratic in y2.
            NormalForm::Fold => Poly2::from_terms([(3, 0, 1.0), (0, 2, 0.5)]),
            // ±y1^4/4 + y1^2*y2/2 + y2^2/2: eliminating y2 from ∂f/∂y2 = x2 leaves
            // the one-variable cusp family ±y1^4/8 + x2*y1^2/2 in y1.
            NormalForm::CuspPlus => Poly2::from_terms([(4, 0, 0.25), (2, 1, 0.5), (0, 2, 0.5)]),
            NormalForm::CuspMinus => Poly2::from_terms([(4, 0, -0.25), (2, 1, 0.5), (0, 2, 0.5)]),
            NormalForm::EllipticUmbilic => Poly2::from_terms([(3, 0, third), (1, 2, -1.0)]),
            NormalForm::HyperbolicUmbilic => Poly2::from_terms([(3, 0, third), (0, 3, third)]),
        }
    }

    pub fn generating_function(self) -> GeneratingFunction {
        GeneratingFunction::new(self.poly(), self.name())
    }
}

impl FromStr for NormalForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormalForm::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::UnknownNormalForm(s.to_string()))
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn normal_form(kind: NormalForm) -> GeneratingFunction {
    kind.generating_function()
}

/// `(eps/2) * (a*y1^2 + b*y1*y2 + c*y2^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPerturbation {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticPerturbation {
    pub fn new(eps: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
        }
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite quadratic coefficient".into()));
        }
        Ok(Self { eps, a, b, c })
    }

    pub fn poly(&self) -> Poly2 {
        let h = 0.5 * self.eps;
        Poly2::from_terms([(2, 0, h * self.a), (1, 1, h * self.b), (0, 2, h * self.c)])
    }

    /// Centre of the critical circle of the perturbed elliptic umbilic.
    pub fn elliptic_circle_centre(&self) -> Point {
        pt(-0.25 * self.eps * (self.a - self.c), 0.25 * self.eps * self.b)
    }

    pub fn elliptic_circle_radius(&self) -> f64 {
        0.25 * self.eps * (self.a + self.c).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    Quadratic(QuadraticPerturbation),
    Poly(Poly2),
}

impl Perturbation {
    pub fn poly(&self) -> Poly2 {
        match self {
            Perturbation::Quadratic(q) => q.poly(),
            Perturbation::Poly(p) => p.clone(),
        }
    }

    fn describe(&self) -> String {
        match self {
            Perturbation::Quadratic(q) => {
                format!("quadratic(eps={}, a={}, b={}, c={})", q.eps, q.a, q.b, q.c)
            }
            Perturbation::Poly(p) => format!("({p})"),
        }
    }
}

pub fn perturb(f: &GeneratingFunction, p: &Perturbation) -> GeneratingFunction {
    f.perturb(p)
}

/// The pyramid slice `elliptic-umbilic + t*y1^2`.
pub fn elliptic_slice(t: f64) -> GeneratingFunction {
    let base = NormalForm::EllipticUmbilic.generating_function();
    let f = base.perturb(&Perturbation::Poly(Poly2::monomial(t, 2, 0)));
    f.with_label(format!("elliptic-umbilic + {t}*y1^2"))
}

/// A base function plus named deformation terms, each scaled by a parameter.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub base: GeneratingFunction,
    pub deformation_terms: Vec<(Poly2, String)>,
}

impl FamilySpec {
    /// Versal deformation `f + a0 + a1*y1 + a2*y2 + a3*y1^2` of the elliptic umbilic.
    pub fn elliptic_versal() -> Self {
        Self {
            base: NormalForm::EllipticUmbilic.generating_function(),
            deformation_terms: vec![
                (Poly2::constant(1.0), "a0".into()),
                (Poly2::monomial(1.0, 1, 0), "a1".into()),
                (Poly2::monomial(1.0, 0, 1), "a2".into()),
                (Poly2::monomial(1.0, 2, 0), "a3".into()),
            ],
        }
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.deformation_terms.iter().map(|(_, n)| n.as_str()).collect()
    }

    /// Evaluates the family at `(name, value)` assignments; missing parameters are zero.
    pub fn at(&self, params: &[(&str, f64)]) -> Result<GeneratingFunction> {
        for (name, _) in params {
            if !self.deformation_terms.iter().any(|(_, n)| n == name) {
                return Err(Error::InvalidInput(format!("unknown family parameter `{name}`")));
            }
        }
        let mut poly = self.base.poly().clone();
        let mut parts = Vec::new();
        for (term, name) in &self.deformation_terms {
            let value: f64 = params
                .iter()
                .filter(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .sum();
            if value != 0.0 {
                poly = &poly + &term.scale(value);
                parts.push(format!("{name}={value}"));
            }
        }
        let label = if parts.is_empty() {
            self.base.label().to_string()
        } else {
            format!("{}[{}]", self.base.label(), parts.join(", "))
        };
        Ok(GeneratingFunction::new(poly, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eu() -> GeneratingFunction {
        NormalForm::EllipticUmbilic.generating_function()
    }

    fn hu() -> GeneratingFunction {
        NormalForm::HyperbolicUmbilic.generating_function()
    }

    #[test]
    fn eval_examples() {
        assert!((eu().eval(pt(1.0, 0.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((hu().eval(pt(1.0, 2.0)) - 3.0).abs() < 1e-15);
        let zero = GeneratingFunction::new(Poly2::zero(), "zero");
        assert_eq!(zero.eval(pt(3.0, -7.0)), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(eu().gradient(pt(1.0, 1.0)), pt(0.0, -2.0));
        assert_eq!(hu().gradient(pt(2.0, 3.0)), pt(4.0, 9.0));
        let id = GeneratingFunction::new("y1^2/2 + y2^2/2".parse().unwrap(), "identity");
        assert_eq!(id.gradient(pt(0.3, -1.7)), pt(0.3, -1.7));
    }

    #[test]
    fn hessian_examples() {
        assert_eq!(eu().hessian(pt(0.0, 0.0)), Matrix2::zeros());
        assert_eq!(hu().hessian(pt(1.0, 2.0)), Matrix2::new(2.0, 0.0, 0.0, 4.0));
        assert_eq!(elliptic_slice(1.0).hessian(pt(0.0, 0.0)), Matrix2::new(2.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn normal_form_polys() {
        assert_eq!(hu().poly(), &Poly2::from_terms([(3, 0, 1.0 / 3.0), (0, 3, 1.0 / 3.0)]));
        assert_eq!(eu().poly(), &Poly2::from_terms([(3, 0, 1.0 / 3.0), (1, 2, -1.0)]));
        let fold = normal_form(NormalForm::Fold);
        assert_eq!(fold.poly(), &Poly2::from_terms([(3, 0, 1.0), (0, 2, 0.5)]));
        assert!(matches!("swallowtail".parse::<NormalForm>(), Err(Error::UnknownNormalForm(_))));
        for k in NormalForm::ALL {
            assert_eq!(k.name().parse::<NormalForm>().unwrap(), k);
        }
    }

    #[test]
    fn elliptic_map_matches_closed_form() {
        // x1 = y1^2 - y2^2, x2 = -2 y1 y2
        let f = eu();
        for &(a, b) in &[(0.3, -1.2), (1.5, 0.25), (-2.0, 0.7)] {
            let g = f.gradient(pt(a, b));
            assert!((g.x - (a * a - b * b)).abs() < 1e-14);
            assert!((g.y + 2.0 * a * b).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_perturbation_terms() {
        let q = QuadraticPerturbation::new(0.2, 1.0, 0.0, 1.0).unwrap();
        let g = eu().perturb(&Perturbation::Quadratic(q));
        let diff = g.poly() - eu().poly();
        assert!((diff.coeff(2, 0) - 0.1).abs() < 1e-15);
        assert!((diff.coeff(0, 2) - 0.1).abs() < 1e-15);
        assert_eq!(diff.coeff(1, 1), 0.0);
        assert!(QuadraticPerturbation::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn perturb_by_zero_is_identity() {
        let f = eu();
        let g = f.perturb(&Perturbation::Poly(Poly2::zero()));
        assert_eq!(g.poly(), f.poly());
        assert_eq!(g.label(), f.label());
    }

    #[test]
    fn slice_is_family_member() {
        let fam = FamilySpec::elliptic_versal();
        let g = fam.at(&[("a3", 1.0)]).unwrap();
        assert_eq!(g.poly(), elliptic_slice(1.0).poly());
        assert!(fam.at(&[("x3", 1.0)]).is_err());
        assert_eq!(fam.parameter_names(), ["a0", "a1", "a2", "a3"]);
    }

    #[test]
    fn det_poly_agrees_with_hessian() {
        let f = elliptic_slice(0.7);
        let det = f.hessian_det_poly();
        for &(a, b) in &[(0.1, 0.2), (-1.0, 0.5), (0.0, 0.0)] {
            let y = pt(a, b);
            assert!((det.eval(y) - f.hessian(y).determinant()).abs() < 1e-12);
        }
    }
}

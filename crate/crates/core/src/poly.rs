//! Sparse bivariate polynomials in the fiber coordinates `(y1, y2)`.
//!
//! Terms are kept in a map keyed by the exponent pair, so two terms never
//! share a degree pair and zero coefficients are dropped on every update.
//! The text form is a `+`-separated sum of `c*y1^i*y2^j` monomials; the
//! parser also accepts the usual shorthand (`y1^3/3 - y1*y2^2`, unary minus,
//! omitted exponents and coefficients).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Point;

/// Exponent pair `(i, j)` of the monomial `y1^i * y2^j`.
pub type Degree = (u32, u32);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly2 {
    terms: BTreeMap<Degree, f64>,
}

/// Which fiber coordinate to differentiate by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Y1,
    Y2,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(coeff: f64, i: u32, j: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(coeff, i, j);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (u32, u32, f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (i, j, c) in terms {
            p.add_term(c, i, j);
        }
        p
    }

    /// Adds `coeff * y1^i * y2^j`, merging with an existing term of the same degree.
    pub fn add_term(&mut self, coeff: f64, i: u32, j: u32) {
        if coeff == 0.0 {
            return;
        }
        let slot = self.terms.entry((i, j)).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.terms.remove(&(i, j));
        }
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Degree, f64)> + '_ {
        self.terms.iter().map(|(&d, &c)| (d, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| (i, j, c * s)))
    }

    pub fn derivative(&self, var: Var) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            match var {
                Var::Y1 if i > 0 => out.add_term(c * f64::from(i), i - 1, j),
                Var::Y2 if j > 0 => out.add_term(c * f64::from(j), i, j - 1),
                _ => {}
            }
        }
        out
    }

    pub fn eval(&self, y: Point) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), &c)| c * y.x.powi(i as i32) * y.y.powi(j as i32))
            .sum()
    }

    /// Exact substitution `y ↦ (s1*y1, s2*y2)`.
    pub fn rescale_vars(&self, s1: f64, s2: f64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|(&(i, j), &c)| (i, j, c * s1.powi(i as i32) * s2.powi(j as i32))),
        )
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(i, j), &c) in &rhs.terms {
            out.add_term(c, i, j);
        }
        out
    }
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(self, rhs: Poly2) -> Poly2 {
        &self + &rhs
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self + &rhs.scale(-1.0)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(i, j), &c) in &self.terms {
            for (&(k, l), &d) in &rhs.terms {
                out.add_term(c * d, i + k, j + l);
            }
        }
        out
    }
}

/// Polynomial compiled to flat arrays for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    terms: Vec<(usize, usize, f64)>,
    max_i: usize,
    max_j: usize,
}

impl Compiled {
    pub(crate) fn new(p: &Poly2) -> Self {
        let terms: Vec<_> = p
            .terms()
            .map(|((i, j), c)| (i as usize, j as usize, c))
            .collect();
        let max_i = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let max_j = terms.iter().map(|t| t.1).max().unwrap_or(0);
        Self { terms, max_i, max_j }
    }

    pub(crate) fn eval_with(&self, p1: &[f64], p2: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * p1[i] * p2[j]).sum()
    }

    pub(crate) fn max_degrees(&self) -> (usize, usize) {
        (self.max_i, self.max_j)
    }
}

/// Fills `out[k] = v^k` for `k ≤ n`.
pub(crate) fn powers(v: f64, n: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=n {
        out[k] = out[k - 1] * v;
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0*y1^0*y2^0");
        }
        // Highest total degree first, then by y1 degree.
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by(|a, b| (b.0 + b.1, b.0).cmp(&(a.0 + a.1, a.0)));
        for (n, (i, j)) in keys.into_iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*y1^{}*y2^{}", self.terms[&(i, j)], i, j)?;
        }
        Ok(())
    }
}

impl FromStr for Poly2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parser::new(s).parse()
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Poly2> {
        let mut out = Poly2::zero();
        self.skip_ws();
        if self.peek().is_none() {
            return self.err("empty polynomial");
        }
        let mut first = true;
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                break;
            }
            let mut sign = 1.0;
            if !first {
                if self.eat('+') {
                } else if self.eat('-') {
                    sign = -1.0;
                } else {
                    return self.err("expected '+' or '-' between terms");
                }
            }
            // Unary signs, e.g. "+ -1*y1" or a leading "-".
            loop {
                if self.eat('-') {
                    sign = -sign;
                } else if !self.eat('+') {
                    break;
                }
            }
            let (c, i, j) = self.term()?;
            out.add_term(sign * c, i, j);
            first = false;
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(f64, u32, u32)> {
        let (mut c, mut i, mut j) = self.factor()?;
        loop {
            if self.eat('*') {
                let (c2, i2, j2) = self.factor()?;
                c *= c2;
                i += i2;
                j += j2;
            } else if self.eat('/') {
                self.skip_ws();
                let at = self.pos;
                let d = self.number()?;
                if d == 0.0 {
                    self.pos = at;
                    return self.err("division by zero");
                }
                c /= d;
            } else {
                break;
            }
        }
        Ok((c, i, j))
    }

    fn factor(&mut self) -> Result<(f64, u32, u32)> {
        self.skip_ws();
        match self.peek() {
            Some('y') => {
                self.pos += 1;
                let var = match self.peek() {
                    Some('1') => Var::Y1,
                    Some('2') => Var::Y2,
                    _ => return self.err("expected variable y1 or y2"),
                };
                self.pos += 1;
                let exp = if self.eat('^') {
                    self.skip_ws();
                    self.exponent()?
                } else {
                    1
                };
                Ok(match var {
                    Var::Y1 => (1.0, exp, 0),
                    Var::Y2 => (1.0, 0, exp),
                })
            }
            Some(c) if c.is_ascii_digit() || c == '.' => Ok((self.number()?, 0, 0)),
            Some(c) => self.err(format!("unexpected character '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }

    fn exponent(&mut self) -> Result<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a non-negative integer exponent");
        }
        self.src[start..self.pos].parse().or_else(|_| {
            self.pos = start;
            self.err("exponent out of range")
        })
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        match self.src[start..self.pos].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.err("malformed number")
            }
        }
    }
}

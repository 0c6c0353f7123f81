//! Exact sparse polynomials in three Cartesian variables.
//!
//! Every potential, pseudopotential and restoring-force field in this crate is
//! a [`TrivariatePolynomial`]. Terms are kept in a `BTreeMap` keyed by the
//! exponent triple `[i, j, k]` of `x^i y^j z^k`, so iteration order (and hence
//! every printed or serialized form) is deterministic. Zero coefficients are
//! never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exponent triple `[i, j, k]` of the monomial `x^i y^j z^k`.
pub type Exponents = [u8; 3];

/// Cartesian axis, indexed `x = 0`, `y = 1`, `z = 2`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    /// Unit exponent vector along this axis.
    pub fn unit(self) -> Exponents {
        let mut e = [0u8; 3];
        e[self.index()] = 1;
        e
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}` (expected x, y or z)")),
        }
    }
}

/// Physical unit attached to a polynomial's coefficients.
///
/// Arithmetic keeps the tag when it is unambiguous and falls back to
/// [`Unit::Derived`] otherwise; the tag is documentation, not dimensional
/// analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Dimensionless,
    Volt,
    Joule,
    /// Acceleration, m/s².
    Acceleration,
    /// Energy per unit mass, J/kg.
    SpecificEnergy,
    Derived,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrivariatePolynomial {
    terms: BTreeMap<Exponents, f64>,
    unit: Unit,
}

impl TrivariatePolynomial {
    pub fn zero(unit: Unit) -> Self {
        Self {
            terms: BTreeMap::new(),
            unit,
        }
    }

    pub fn constant(c: f64, unit: Unit) -> Self {
        Self::monomial([0, 0, 0], c, unit)
    }

    pub fn monomial(exps: Exponents, coeff: f64, unit: Unit) -> Self {
        let mut p = Self::zero(unit);
        p.add_term(exps, coeff);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, merging duplicates.
    pub fn from_terms<I>(terms: I, unit: Unit) -> Self
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        let mut p = Self::zero(unit);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    /// The linear polynomial `scale · axis`.
    pub fn variable(axis: Axis, scale: f64, unit: Unit) -> Self {
        Self::monomial(axis.unit(), scale, unit)
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponents, f64)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, *c))
    }

    pub fn coeff(&self, exps: Exponents) -> f64 {
        self.terms.get(&exps).copied().unwrap_or(0.0)
    }

    /// Adds `coeff` to the term with exponents `exps`, dropping it if the sum is zero.
    pub fn add_term(&mut self, exps: Exponents, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&exps);
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| total_degree(*e))
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zero(self.unit);
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, c * factor)).collect(),
            unit: self.unit,
        }
    }

    /// Partial derivative with respect to `axis`.
    pub fn derivative(&self, axis: Axis) -> Self {
        let i = axis.index();
        let mut out = Self::zero(self.unit);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = *e;
            d[i] -= 1;
            out.add_term(d, c * f64::from(e[i]));
        }
        out
    }

    pub fn gradient(&self) -> [Self; 3] {
        Axis::ALL.map(|a| self.derivative(a))
    }

    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.unit);
        for a in Axis::ALL {
            let dd = self.derivative(a).derivative(a);
            out = &out + &dd;
        }
        out
    }

    /// Substitutes `x → sx·x, y → sy·y, z → sz·z`.
    pub fn rescale_variables(&self, s: [f64; 3]) -> Self {
        let mut out = Self::zero(self.unit);
        for (e, c) in &self.terms {
            let f = s[0].powi(i32::from(e[0]))
                * s[1].powi(i32::from(e[1]))
                * s[2].powi(i32::from(e[2]));
            out.add_term(*e, c * f);
        }
        out
    }

    /// Re-expands about `center`: returns `q` with `q(r) = p(r + center)`.
    pub fn shifted(&self, center: [f64; 3]) -> Self {
        if center == [0.0; 3] {
            return self.clone();
        }
        let mut out = Self::zero(self.unit);
        for (e, c) in &self.terms {
            let bx = binomial_row(e[0], center[0]);
            let by = binomial_row(e[1], center[1]);
            let bz = binomial_row(e[2], center[2]);
            for (i, cx) in bx.iter().enumerate() {
                for (j, cy) in by.iter().enumerate() {
                    for (k, cz) in bz.iter().enumerate() {
                        out.add_term([i as u8, j as u8, k as u8], c * cx * cy * cz);
                    }
                }
            }
        }
        out
    }

    /// Keeps only the terms of total degree `<= max_degree`.
    pub fn truncated(&self, max_degree: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| total_degree(**e) <= max_degree)
                .map(|(e, c)| (*e, *c))
                .collect(),
            unit: self.unit,
        }
    }

    /// Evaluates with precomputed powers of each coordinate.
    pub fn eval(&self, r: [f64; 3]) -> f64 {
        let d = self.max_exponent();
        let mut pw = [[1.0f64; MAX_POW]; 3];
        let n = (d as usize + 1).min(MAX_POW);
        for a in 0..3 {
            for k in 1..n {
                pw[a][k] = pw[a][k - 1] * r[a];
            }
        }
        if (d as usize) < MAX_POW {
            self.terms
                .iter()
                .map(|(e, c)| {
                    c * pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize]
                })
                .sum()
        } else {
            self.eval_naive(r)
        }
    }

    /// Term-by-term evaluation with `powi`, kept as a reference path.
    pub fn eval_naive(&self, r: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * r[0].powi(i32::from(e[0]))
                    * r[1].powi(i32::from(e[1]))
                    * r[2].powi(i32::from(e[2]))
            })
            .sum()
    }

    fn max_exponent(&self) -> u8 {
        self.terms
            .keys()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Freezes the term list into a flat form for repeated evaluation.
    pub fn compile(&self) -> CompiledPolynomial {
        CompiledPolynomial::new(self)
    }
}

const MAX_POW: usize = 16;

pub fn total_degree(e: Exponents) -> u32 {
    u32::from(e[0]) + u32::from(e[1]) + u32::from(e[2])
}

/// Coefficients of `(t + c)^n` in ascending powers of `t`.
fn binomial_row(n: u8, c: f64) -> Vec<f64> {
    let n = n as usize;
    let mut row = vec![0.0; n + 1];
    let mut binom = 1.0;
    for (k, r) in row.iter_mut().enumerate() {
        // coefficient of t^k is C(n,k) c^(n-k)
        *r = binom * c.powi((n - k) as i32);
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    row
}

fn combine_units(a: Unit, b: Unit) -> Unit {
    match (a, b) {
        (Unit::Dimensionless, u) | (u, Unit::Dimensionless) => u,
        (x, y) if x == y && matches!(x, Unit::Derived) => Unit::Derived,
        _ => Unit::Derived,
    }
}

fn sum_units(a: Unit, b: Unit, a_zero: bool, b_zero: bool) -> Unit {
    if a == b || b_zero {
        a
    } else if a_zero {
        b
    } else {
        Unit::Derived
    }
}

impl Add for &TrivariatePolynomial {
    type Output = TrivariatePolynomial;

    fn add(self, rhs: &TrivariatePolynomial) -> TrivariatePolynomial {
        let mut out = self.clone();
        out.unit = sum_units(self.unit, rhs.unit, self.is_zero(), rhs.is_zero());
        for (e, c) in &rhs.terms {
            out.add_term(*e, *c);
        }
        out
    }
}

impl Sub for &TrivariatePolynomial {
    type Output = TrivariatePolynomial;

    fn sub(self, rhs: &TrivariatePolynomial) -> TrivariatePolynomial {
        let mut out = self.clone();
        out.unit = sum_units(self.unit, rhs.unit, self.is_zero(), rhs.is_zero());
        for (e, c) in &rhs.terms {
            out.add_term(*e, -*c);
        }
        out
    }
}

impl Neg for &TrivariatePolynomial {
    type Output = TrivariatePolynomial;

    fn neg(self) -> TrivariatePolynomial {
        self.scale(-1.0)
    }
}

impl Mul for &TrivariatePolynomial {
    type Output = TrivariatePolynomial;

    fn mul(self, rhs: &TrivariatePolynomial) -> TrivariatePolynomial {
        let mut out = TrivariatePolynomial::zero(combine_units(self.unit, rhs.unit));
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                out.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for TrivariatePolynomial {
            type Output = TrivariatePolynomial;
            fn $m(self, rhs: TrivariatePolynomial) -> TrivariatePolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for TrivariatePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // highest degree first reads more naturally
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| total_degree(**b).cmp(&total_degree(**a)).then(b.cmp(a)));
        for (n, (e, c)) in terms.into_iter().enumerate() {
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if n == 0 {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mono = monomial_string(*e);
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                f.write_str(&mono)?;
            } else {
                write!(f, "{mag}*{mono}")?;
            }
        }
        Ok(())
    }
}

/// `x^2*y*z`-style rendering of an exponent triple; empty for the constant.
pub fn monomial_string(e: Exponents) -> String {
    let mut parts = Vec::new();
    for (i, v) in ["x", "y", "z"].iter().enumerate() {
        match e[i] {
            0 => {}
            1 => parts.push((*v).to_string()),
            p => parts.push(format!("{v}^{p}")),
        }
    }
    parts.join("*")
}

/// Flat evaluation form of a polynomial of per-variable degree `< 8`.
#[derive(Clone, Debug)]
pub struct CompiledPolynomial {
    terms: Vec<(usize, usize, usize, f64)>,
    max_pow: usize,
}

impl CompiledPolynomial {
    fn new(p: &TrivariatePolynomial) -> Self {
        let max_pow = p.max_exponent() as usize;
        assert!(
            max_pow < 8,
            "compiled polynomials support exponents below 8"
        );
        Self {
            terms: p
                .terms()
                .map(|(e, c)| (e[0] as usize, e[1] as usize, e[2] as usize, c))
                .collect(),
            max_pow,
        }
    }

    pub fn max_pow(&self) -> usize {
        self.max_pow
    }

    /// Evaluates using a caller-supplied power table `pw[axis][k] = r[axis]^k`.
    #[inline]
    pub fn eval_with_powers(&self, pw: &[[f64; 8]; 3]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, k, c)| c * pw[0][i] * pw[1][j] * pw[2][k])
            .sum()
    }

    pub fn eval(&self, r: [f64; 3]) -> f64 {
        self.eval_with_powers(&power_table(r, self.max_pow))
    }
}

/// `pw[a][k] = r[a]^k` for `k <= max_pow`.
#[inline]
pub fn power_table(r: [f64; 3], max_pow: usize) -> [[f64; 8]; 3] {
    let mut pw = [[1.0f64; 8]; 3];
    for a in 0..3 {
        for k in 1..=max_pow.min(7) {
            pw[a][k] = pw[a][k - 1] * r[a];
        }
    }
    pw
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(terms: &[(Exponents, f64)]) -> TrivariatePolynomial {
        TrivariatePolynomial::from_terms(terms.iter().copied(), Unit::Dimensionless)
    }

    #[test]
    fn zero_terms_are_dropped() {
        let a = p(&[([1, 0, 0], 2.0), ([0, 1, 0], 1.0)]);
        let b = p(&[([1, 0, 0], -2.0)]);
        let s = &a + &b;
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff([1, 0, 0]), 0.0);
        assert!((&a - &a).is_zero());
    }

    #[test]
    fn product_by_hand() {
        // (x + y)(x - y) = x^2 - y^2
        let a = p(&[([1, 0, 0], 1.0), ([0, 1, 0], 1.0)]);
        let b = p(&[([1, 0, 0], 1.0), ([0, 1, 0], -1.0)]);
        let c = &a * &b;
        assert_eq!(c, p(&[([2, 0, 0], 1.0), ([0, 2, 0], -1.0)]));
    }

    #[test]
    fn derivative_by_hand() {
        // d/dz (3 x z^2 + y) = 6 x z
        let a = p(&[([1, 0, 2], 3.0), ([0, 1, 0], 1.0)]);
        assert_eq!(a.derivative(Axis::Z), p(&[([1, 0, 1], 6.0)]));
        assert!(a.derivative(Axis::Z).derivative(Axis::Y).is_zero());
    }

    #[test]
    fn square_of_quartic_has_degree_eight() {
        let a = p(&[([0, 0, 4], 1.0), ([2, 2, 0], -3.0)]);
        assert_eq!((&a * &a).degree(), 8);
    }

    #[test]
    fn shift_matches_direct_evaluation() {
        let a = p(&[
            ([2, 1, 0], 1.5),
            ([0, 0, 3], -2.0),
            ([1, 1, 1], 0.25),
            ([0, 0, 0], 4.0),
        ]);
        let c = [0.3, -0.7, 1.1];
        let s = a.shifted(c);
        for r in [[0.0, 0.0, 0.0], [0.2, 0.5, -0.4], [-1.0, 2.0, 0.5]] {
            let direct = a.eval([r[0] + c[0], r[1] + c[1], r[2] + c[2]]);
            assert!((s.eval(r) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn laplacian_of_harmonic_is_zero() {
        // 2z^2 - x^2 - y^2
        let a = p(&[([0, 0, 2], 2.0), ([2, 0, 0], -1.0), ([0, 2, 0], -1.0)]);
        assert!(a.laplacian().is_zero());
    }

    #[test]
    fn display_is_readable() {
        let a = p(&[([0, 0, 2], 2.0), ([2, 0, 0], -1.0)]);
        assert_eq!(a.to_string(), "-x^2 + 2*z^2");
    }

    #[test]
    fn compiled_eval_matches() {
        let a = p(&[([3, 0, 0], 1.0), ([1, 2, 0], -3.0), ([0, 0, 1], 0.5)]);
        let c = a.compile();
        let r = [0.3, -1.2, 2.0];
        assert!((c.eval(r) - a.eval_naive(r)).abs() < 1e-14);
    }
}

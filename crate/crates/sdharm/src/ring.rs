//! Exact scalar arithmetic on the chart `S^1 x D^3`.
//!
//! Elements are finite sums of terms
//! `c * x1^a1 x2^a2 x3^a3 * e^(k*x3) * {1, cos(m*theta), sin(m*theta)}`
//! with rational `c`. The set is closed under `+`, `*` and all four
//! partial derivatives, so identities between the forms built on top of
//! it can be decided by an exact zero test instead of floating point.
//!
//! Division is not supported and neither is indefinite integration in
//! `theta`; only the definite integral over `[0, 2*pi]` (restricted to
//! the core circle `x = 0`) is provided.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

/// Shorthand for a small rational constant.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Serde adapter serializing rationals as `"p/q"` strings, the same
/// shape the term records use.
pub mod rational_serde {
    use super::Rational;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse()
            .map_err(|_| D::Error::custom(format!("invalid rational `{s}`")))
    }
}

#[derive(Debug, Error)]
pub enum RingError {
    #[error("{quantity} {value} exceeds the configured limit {limit}")]
    LimitExceeded {
        quantity: &'static str,
        value: i64,
        limit: i64,
    },
    #[error("point lies outside the closed unit ball: |x| = {norm}")]
    OutsideChart { norm: f64 },
    #[error("point is not on the unit sphere: |x| = {norm}")]
    NotOnSphere { norm: f64 },
    #[error("element has a nonzero theta-average; no periodic antiderivative exists")]
    NonperiodicAntiderivative,
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("unknown trig kind `{0}`")]
    BadTrigKind(String),
}

/// Coordinate directions on the chart, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Theta,
    X1,
    X2,
    X3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::Theta, Var::X1, Var::X2, Var::X3];

    /// Index in the basis order `(theta, x1, x2, x3)`.
    pub fn index(self) -> usize {
        match self {
            Var::Theta => 0,
            Var::X1 => 1,
            Var::X2 => 2,
            Var::X3 => 3,
        }
    }

    pub fn from_index(i: usize) -> Var {
        Var::ALL[i]
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Theta => write!(f, "θ"),
            Var::X1 => write!(f, "x1"),
            Var::X2 => write!(f, "x2"),
            Var::X3 => write!(f, "x3"),
        }
    }
}

/// Angular factor of a term. `Cos(0)` is represented as `One` and
/// `Sin(0)` never appears (it is the zero term).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trig {
    One,
    Cos(u32),
    Sin(u32),
}

impl Trig {
    fn order_key(&self) -> (u8, u32) {
        match self {
            Trig::One => (0, 0),
            Trig::Cos(m) => (1, *m),
            Trig::Sin(m) => (2, *m),
        }
    }

    fn eval(&self, theta: f64) -> f64 {
        match self {
            Trig::One => 1.0,
            Trig::Cos(m) => (*m as f64 * theta).cos(),
            Trig::Sin(m) => (*m as f64 * theta).sin(),
        }
    }
}

/// One monomial `coeff * x^powers * e^(exp_rate * x3) * trig(theta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingTerm {
    pub coeff: Rational,
    pub powers: [u32; 3],
    pub exp_rate: i32,
    pub trig: Trig,
}

impl RingTerm {
    pub fn new(coeff: Rational, powers: [u32; 3], exp_rate: i32, trig: Trig) -> RingTerm {
        RingTerm {
            coeff,
            powers,
            exp_rate,
            trig,
        }
    }

    fn key(&self) -> TermKey {
        TermKey {
            powers: self.powers,
            exp_rate: self.exp_rate,
            trig: self.trig.order_key(),
        }
    }

    fn x_degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval_at(&self, theta: f64, x: [f64; 3]) -> f64 {
        let mut v = self.coeff.to_f64().unwrap_or(f64::NAN);
        for (xi, &p) in x.iter().zip(self.powers.iter()) {
            v *= xi.powi(p as i32);
        }
        if self.exp_rate != 0 {
            v *= (self.exp_rate as f64 * x[2]).exp();
        }
        v * self.trig.eval(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    powers: [u32; 3],
    exp_rate: i32,
    trig: (u8, u32),
}

/// Bounds that catch runaway expressions. Products add frequencies,
/// powers and exponential rates, so unbounded growth indicates a bug in
/// the caller rather than a legitimate computation.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_freq: u32,
    pub max_power: u32,
    pub max_exp_rate: u32,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_freq: 64,
            max_power: 64,
            max_exp_rate: 64,
        }
    }
}

impl Limits {
    fn check(&self, term: &RingTerm) -> Result<(), RingError> {
        let freq = match term.trig {
            Trig::One => 0,
            Trig::Cos(m) | Trig::Sin(m) => m,
        };
        if freq > self.max_freq {
            return Err(RingError::LimitExceeded {
                quantity: "trig frequency",
                value: freq as i64,
                limit: self.max_freq as i64,
            });
        }
        for &p in &term.powers {
            if p > self.max_power {
                return Err(RingError::LimitExceeded {
                    quantity: "monomial power",
                    value: p as i64,
                    limit: self.max_power as i64,
                });
            }
        }
        if term.exp_rate.unsigned_abs() > self.max_exp_rate {
            return Err(RingError::LimitExceeded {
                quantity: "exponential rate",
                value: term.exp_rate as i64,
                limit: self.max_exp_rate as i64,
            });
        }
        Ok(())
    }
}

/// A point `(theta, x)` of the chart, with `theta` reduced mod `2*pi`
/// and `|x| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    theta: f64,
    x: [f64; 3],
}

const BALL_SLACK: f64 = 1e-12;
const SPHERE_TOL: f64 = 1e-12;

impl ChartPoint {
    pub fn new(theta: f64, x: [f64; 3]) -> Result<ChartPoint, RingError> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + BALL_SLACK {
            return Err(RingError::OutsideChart { norm });
        }
        Ok(ChartPoint {
            theta: theta.rem_euclid(TAU),
            x,
        })
    }

    /// A point required to lie on the boundary sphere `|x| = 1`.
    pub fn sphere(theta: f64, x: [f64; 3]) -> Result<ChartPoint, RingError> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(RingError::NotOnSphere { norm });
        }
        Ok(ChartPoint {
            theta: theta.rem_euclid(TAU),
            x,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn x(&self) -> [f64; 3] {
        self.x
    }

    pub fn x_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Canonical finite sum of [`RingTerm`]s. Equal functions have equal
/// term lists, so `==` decides equality of functions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RingElement {
    terms: Vec<RingTerm>,
}

impl RingElement {
    pub fn zero() -> RingElement {
        RingElement { terms: Vec::new() }
    }

    pub fn one() -> RingElement {
        RingElement::constant(rat(1, 1))
    }

    pub fn constant(c: Rational) -> RingElement {
        if c.is_zero() {
            return RingElement::zero();
        }
        RingElement {
            terms: vec![RingTerm::new(c, [0, 0, 0], 0, Trig::One)],
        }
    }

    pub fn int(n: i64) -> RingElement {
        RingElement::constant(rat(n, 1))
    }

    pub fn rational(p: i64, q: i64) -> RingElement {
        RingElement::constant(rat(p, q))
    }

    /// The coordinate function `x1`, `x2` or `x3`.
    pub fn coordinate(v: Var) -> RingElement {
        let mut powers = [0u32; 3];
        match v {
            Var::Theta => panic!("theta itself is not a ring element; use cos/sin"),
            Var::X1 => powers[0] = 1,
            Var::X2 => powers[1] = 1,
            Var::X3 => powers[2] = 1,
        }
        RingElement {
            terms: vec![RingTerm::new(rat(1, 1), powers, 0, Trig::One)],
        }
    }

    pub fn x1() -> RingElement {
        RingElement::coordinate(Var::X1)
    }

    pub fn x2() -> RingElement {
        RingElement::coordinate(Var::X2)
    }

    pub fn x3() -> RingElement {
        RingElement::coordinate(Var::X3)
    }

    pub fn cos_theta(m: u32) -> RingElement {
        if m == 0 {
            return RingElement::one();
        }
        RingElement {
            terms: vec![RingTerm::new(rat(1, 1), [0, 0, 0], 0, Trig::Cos(m))],
        }
    }

    pub fn sin_theta(m: u32) -> RingElement {
        if m == 0 {
            return RingElement::zero();
        }
        RingElement {
            terms: vec![RingTerm::new(rat(1, 1), [0, 0, 0], 0, Trig::Sin(m))],
        }
    }

    pub fn exp_x3(k: i32) -> RingElement {
        RingElement {
            terms: vec![RingTerm::new(rat(1, 1), [0, 0, 0], k, Trig::One)],
        }
    }

    /// Canonicalize a raw term list: fold trig products already reduced
    /// by [`mul`], merge like terms, drop zero coefficients and sort.
    pub fn normalize(raw: Vec<RingTerm>) -> Result<RingElement, RingError> {
        RingElement::normalize_with(raw, &Limits::default())
    }

    pub fn normalize_with(raw: Vec<RingTerm>, limits: &Limits) -> Result<RingElement, RingError> {
        let mut acc: BTreeMap<TermKey, Rational> = BTreeMap::new();
        for term in raw {
            limits.check(&term)?;
            if term.coeff.is_zero() {
                continue;
            }
            // Sin(0) is the zero term; Cos(0) folds into One.
            let term = match term.trig {
                Trig::Sin(0) => continue,
                Trig::Cos(0) => RingTerm { trig: Trig::One, ..term },
                _ => term,
            };
            let entry = acc.entry(term.key()).or_insert_with(Rational::zero);
            *entry += term.coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(key, coeff)| RingTerm {
                coeff,
                powers: key.powers,
                exp_rate: key.exp_rate,
                trig: match key.trig {
                    (0, _) => Trig::One,
                    (1, m) => Trig::Cos(m),
                    (2, m) => Trig::Sin(m),
                    _ => unreachable!(),
                },
            })
            .collect();
        Ok(RingElement { terms })
    }

    pub fn terms(&self) -> &[RingTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &Rational) -> RingElement {
        if c.is_zero() {
            return RingElement::zero();
        }
        RingElement {
            terms: self
                .terms
                .iter()
                .map(|t| RingTerm {
                    coeff: &t.coeff * c,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn try_mul(&self, other: &RingElement, limits: &Limits) -> Result<RingElement, RingError> {
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len() * 2);
        for a in &self.terms {
            for b in &other.terms {
                mul_terms(a, b, &mut raw);
            }
        }
        RingElement::normalize_with(raw, limits)
    }

    /// Exact partial derivative with respect to one chart coordinate.
    pub fn partial(&self, v: Var) -> RingElement {
        let mut raw = Vec::new();
        for t in &self.terms {
            match v {
                Var::Theta => match t.trig {
                    Trig::One => {}
                    Trig::Cos(m) => raw.push(RingTerm::new(
                        -&t.coeff * rat(m as i64, 1),
                        t.powers,
                        t.exp_rate,
                        Trig::Sin(m),
                    )),
                    Trig::Sin(m) => raw.push(RingTerm::new(
                        &t.coeff * rat(m as i64, 1),
                        t.powers,
                        t.exp_rate,
                        Trig::Cos(m),
                    )),
                },
                Var::X1 | Var::X2 => {
                    let i = v.index() - 1;
                    if t.powers[i] > 0 {
                        let mut powers = t.powers;
                        powers[i] -= 1;
                        raw.push(RingTerm::new(
                            &t.coeff * rat(t.powers[i] as i64, 1),
                            powers,
                            t.exp_rate,
                            t.trig,
                        ));
                    }
                }
                Var::X3 => {
                    // Product rule over x3^a * e^(k*x3).
                    if t.powers[2] > 0 {
                        let mut powers = t.powers;
                        powers[2] -= 1;
                        raw.push(RingTerm::new(
                            &t.coeff * rat(t.powers[2] as i64, 1),
                            powers,
                            t.exp_rate,
                            t.trig,
                        ));
                    }
                    if t.exp_rate != 0 {
                        raw.push(RingTerm::new(
                            &t.coeff * rat(t.exp_rate as i64, 1),
                            t.powers,
                            t.exp_rate,
                            t.trig,
                        ));
                    }
                }
            }
        }
        RingElement::normalize(raw).expect("derivative cannot exceed limits")
    }

    pub fn eval(&self, p: &ChartPoint) -> f64 {
        self.eval_at(p.theta, p.x)
    }

    /// Evaluation at raw coordinates. Used by the numeric integrators,
    /// whose intermediate stages may leave the closed unit ball.
    pub fn eval_at(&self, theta: f64, x: [f64; 3]) -> f64 {
        self.terms.iter().map(|t| t.eval_at(theta, x)).sum()
    }

    /// Restriction to the core circle `x = 0` (a trig polynomial in
    /// `theta` alone; `e^(k*x3)` restricts to `1`).
    pub fn restrict_core(&self) -> RingElement {
        let raw = self
            .terms
            .iter()
            .filter(|t| t.powers == [0, 0, 0])
            .map(|t| RingTerm::new(t.coeff.clone(), [0, 0, 0], 0, t.trig))
            .collect();
        RingElement::normalize(raw).expect("restriction cannot exceed limits")
    }

    /// Definite integral over `theta` in `[0, 2*pi]` at `x = 0`,
    /// reported exactly as a rational multiple of `2*pi`.
    pub fn theta_integral_core(&self) -> Rational {
        let mut total = Rational::zero();
        for t in &self.terms {
            if t.powers == [0, 0, 0] && t.trig == Trig::One {
                total += &t.coeff;
            }
        }
        total
    }

    /// Periodic antiderivative in `theta` of a pure trig polynomial.
    /// Fails when a `One` term is present (mean value nonzero) or when a
    /// term depends on `x`.
    pub fn theta_antiderivative(&self) -> Result<RingElement, RingError> {
        let mut raw = Vec::new();
        for t in &self.terms {
            match t.trig {
                Trig::One => return Err(RingError::NonperiodicAntiderivative),
                Trig::Cos(m) => raw.push(RingTerm::new(
                    &t.coeff * rat(1, m as i64),
                    t.powers,
                    t.exp_rate,
                    Trig::Sin(m),
                )),
                Trig::Sin(m) => raw.push(RingTerm::new(
                    -&t.coeff * rat(1, m as i64),
                    t.powers,
                    t.exp_rate,
                    Trig::Cos(m),
                )),
            }
        }
        RingElement::normalize(raw)
    }

    /// Largest total x-degree among terms.
    pub fn x_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.x_degree()).max().unwrap_or(0)
    }

    /// True when every term has `exp_rate == 0` (pure trig polynomial).
    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.exp_rate == 0)
    }

    /// Divides each term by `(its x-degree + shift)`. This is the exact
    /// weighted radial integral `\int_0^1 s^(d + shift - 1) ds` applied
    /// termwise, which is what the cone homotopy operator needs on
    /// polynomial coefficients.
    pub fn radial_weight(&self, shift: u32) -> RingElement {
        let raw = self
            .terms
            .iter()
            .map(|t| RingTerm::new(
                &t.coeff * rat(1, (t.x_degree() + shift) as i64),
                t.powers,
                t.exp_rate,
                t.trig,
            ))
            .collect();
        RingElement::normalize(raw).expect("weighting cannot exceed limits")
    }
}

/// Product of two canonical terms, appended to `out` as raw terms
/// (at most two, from the product-to-sum rewriting of trig factors).
fn mul_terms(a: &RingTerm, b: &RingTerm, out: &mut Vec<RingTerm>) {
    let coeff = &a.coeff * &b.coeff;
    let powers = [
        a.powers[0] + b.powers[0],
        a.powers[1] + b.powers[1],
        a.powers[2] + b.powers[2],
    ];
    let exp_rate = a.exp_rate + b.exp_rate;
    for (factor, trig) in trig_product(a.trig, b.trig) {
        out.push(RingTerm::new(&coeff * factor, powers, exp_rate, trig));
    }
}

/// Signed-frequency fold: `cos(-m) = cos(m)`, `sin(-m) = -sin(m)`.
fn fold(kind_sin: bool, m: i64) -> (Rational, Trig) {
    if kind_sin {
        match m.cmp(&0) {
            Ordering::Equal => (Rational::zero(), Trig::One),
            Ordering::Greater => (rat(1, 1), Trig::Sin(m as u32)),
            Ordering::Less => (rat(-1, 1), Trig::Sin((-m) as u32)),
        }
    } else if m == 0 {
        (rat(1, 1), Trig::One)
    } else {
        (rat(1, 1), Trig::Cos(m.unsigned_abs() as u32))
    }
}

/// Product-to-sum identities with exact rational 1/2 factors.
fn trig_product(a: Trig, b: Trig) -> Vec<(Rational, Trig)> {
    let half = rat(1, 2);
    let pair = |s1: bool, m1: i64, c1: Rational, s2: bool, m2: i64, c2: Rational| {
        let mut v = Vec::with_capacity(2);
        let (f1, t1) = fold(s1, m1);
        if !f1.is_zero() {
            v.push((c1 * f1, t1));
        }
        let (f2, t2) = fold(s2, m2);
        if !f2.is_zero() {
            v.push((c2 * f2, t2));
        }
        v
    };
    match (a, b) {
        (Trig::One, t) | (t, Trig::One) => vec![(rat(1, 1), t)],
        (Trig::Cos(p), Trig::Cos(q)) => pair(
            false,
            p as i64 - q as i64,
            half.clone(),
            false,
            p as i64 + q as i64,
            half,
        ),
        (Trig::Sin(p), Trig::Sin(q)) => pair(
            false,
            p as i64 - q as i64,
            half.clone(),
            false,
            p as i64 + q as i64,
            -half,
        ),
        (Trig::Sin(p), Trig::Cos(q)) => pair(
            true,
            p as i64 + q as i64,
            half.clone(),
            true,
            p as i64 - q as i64,
            half,
        ),
        (Trig::Cos(p), Trig::Sin(q)) => pair(
            true,
            p as i64 + q as i64,
            half.clone(),
            true,
            q as i64 - p as i64,
            half,
        ),
    }
}

impl Add for &RingElement {
    type Output = RingElement;
    fn add(self, rhs: &RingElement) -> RingElement {
        let mut raw = self.terms.clone();
        raw.extend(rhs.terms.iter().cloned());
        RingElement::normalize(raw).expect("sum of canonical elements stays within limits")
    }
}

impl Sub for &RingElement {
    type Output = RingElement;
    fn sub(self, rhs: &RingElement) -> RingElement {
        self + &(-rhs)
    }
}

impl Neg for &RingElement {
    type Output = RingElement;
    fn neg(self) -> RingElement {
        RingElement {
            terms: self
                .terms
                .iter()
                .map(|t| RingTerm {
                    coeff: -&t.coeff,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

impl Mul for &RingElement {
    type Output = RingElement;
    fn mul(self, rhs: &RingElement) -> RingElement {
        self.try_mul(rhs, &Limits::default())
            .expect("ring limit exceeded in product; use try_mul for fallible multiplication")
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for RingElement {
            type Output = RingElement;
            fn $method(self, rhs: RingElement) -> RingElement {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&RingElement> for RingElement {
            type Output = RingElement;
            fn $method(self, rhs: &RingElement) -> RingElement {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for RingElement {
    type Output = RingElement;
    fn neg(self) -> RingElement {
        -&self
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = t.coeff.abs();
            let mut wrote_factor = false;
            if mag != rat(1, 1) {
                write!(f, "{}", mag)?;
                wrote_factor = true;
            }
            let names = ["x1", "x2", "x3"];
            for (j, &p) in t.powers.iter().enumerate() {
                if p > 0 {
                    if wrote_factor {
                        write!(f, "·")?;
                    }
                    write!(f, "{}", names[j])?;
                    if p > 1 {
                        write!(f, "^{}", p)?;
                    }
                    wrote_factor = true;
                }
            }
            if t.exp_rate != 0 {
                if wrote_factor {
                    write!(f, "·")?;
                }
                if t.exp_rate == 1 {
                    write!(f, "e^x3")?;
                } else {
                    write!(f, "e^{}x3", t.exp_rate)?;
                }
                wrote_factor = true;
            }
            match t.trig {
                Trig::One => {}
                Trig::Cos(m) => {
                    if wrote_factor {
                        write!(f, "·")?;
                    }
                    if m == 1 {
                        write!(f, "cos θ")?;
                    } else {
                        write!(f, "cos {}θ", m)?;
                    }
                    wrote_factor = true;
                }
                Trig::Sin(m) => {
                    if wrote_factor {
                        write!(f, "·")?;
                    }
                    if m == 1 {
                        write!(f, "sin θ")?;
                    } else {
                        write!(f, "sin {}θ", m)?;
                    }
                    wrote_factor = true;
                }
            }
            if !wrote_factor {
                write!(f, "1")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TrigRecord {
    kind: String,
    m: u32,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    c: String,
    pow: [u32; 3],
    exp: i32,
    trig: TrigRecord,
}

impl Serialize for RingElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let records: Vec<TermRecord> = self
            .terms
            .iter()
            .map(|t| TermRecord {
                c: t.coeff.to_string(),
                pow: t.powers,
                exp: t.exp_rate,
                trig: match t.trig {
                    Trig::One => TrigRecord {
                        kind: "one".into(),
                        m: 0,
                    },
                    Trig::Cos(m) => TrigRecord {
                        kind: "cos".into(),
                        m,
                    },
                    Trig::Sin(m) => TrigRecord {
                        kind: "sin".into(),
                        m,
                    },
                },
            })
            .collect();
        records.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RingElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<RingElement, D::Error> {
        let records = Vec::<TermRecord>::deserialize(deserializer)?;
        let mut raw = Vec::with_capacity(records.len());
        for r in records {
            let coeff: Rational = r
                .c
                .parse()
                .map_err(|_| D::Error::custom(format!("invalid rational `{}`", r.c)))?;
            let trig = match r.trig.kind.as_str() {
                "one" => Trig::One,
                "cos" => Trig::Cos(r.trig.m),
                "sin" => Trig::Sin(r.trig.m),
                other => return Err(D::Error::custom(format!("unknown trig kind `{other}`"))),
            };
            raw.push(RingTerm::new(coeff, r.pow, r.exp, trig));
        }
        RingElement::normalize(raw).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos1() -> RingElement {
        RingElement::cos_theta(1)
    }

    fn sin1() -> RingElement {
        RingElement::sin_theta(1)
    }

    #[test]
    fn cos_squared_reduces_to_double_angle() {
        let sq = &cos1() * &cos1();
        let expected = RingElement::rational(1, 2)
            + RingElement::cos_theta(2).scale(&rat(1, 2));
        assert_eq!(sq, expected);
    }

    #[test]
    fn exponent_rates_add() {
        let p = &(&RingElement::x1() * &RingElement::exp_x3(1)) * &RingElement::exp_x3(2);
        let expected = &RingElement::x1() * &RingElement::exp_x3(3);
        assert_eq!(p, expected);
    }

    #[test]
    fn sin_cos_minus_half_sin2_is_zero() {
        let lhs = &sin1() * &cos1();
        let rhs = RingElement::sin_theta(2).scale(&rat(1, 2));
        assert!((&lhs - &rhs).is_zero());
    }

    #[test]
    fn partial_theta_of_cos_is_minus_sin() {
        assert_eq!(cos1().partial(Var::Theta), -&sin1());
    }

    #[test]
    fn partial_x3_applies_product_rule() {
        let e = &RingElement::x1() * &RingElement::exp_x3(1);
        let d = e.partial(Var::X3);
        assert_eq!(d, e);
        let e2 = &RingElement::x3() * &RingElement::exp_x3(2);
        let d2 = e2.partial(Var::X3);
        let expected = RingElement::exp_x3(2) + e2.scale(&rat(2, 1));
        assert_eq!(d2, expected);
    }

    #[test]
    fn partial_x1_of_quadratic_potential() {
        // d/dx1 of (x1^2 + x2^2)/2 - x3^2 is x1.
        let half = rat(1, 2);
        let pot = (&RingElement::x1() * &RingElement::x1()).scale(&half)
            + (&RingElement::x2() * &RingElement::x2()).scale(&half)
            - (&RingElement::x3() * &RingElement::x3());
        assert_eq!(pot.partial(Var::X1), RingElement::x1());
    }

    #[test]
    fn eval_matches_hand_values() {
        let e = &(&RingElement::x1() * &RingElement::x1())
            + &(&(&RingElement::x2() * &RingElement::x2())
                + &(&RingElement::x3() * &RingElement::x3()).scale(&rat(4, 1)));
        let p = ChartPoint::new(0.3, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.eval(&p), 1.0);
        assert_eq!(RingElement::zero().eval(&p), 0.0);
        let c2 = RingElement::cos_theta(2);
        let q = ChartPoint::new(PI / 2.0, [0.0, 0.0, 0.0]).unwrap();
        assert!((c2.eval(&q) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_integrals_on_core() {
        assert_eq!(cos1().theta_integral_core(), rat(0, 1));
        assert_eq!(RingElement::one().theta_integral_core(), rat(1, 1));
        let half_plus_half_cos2 = RingElement::rational(1, 2)
            + RingElement::cos_theta(2).scale(&rat(1, 2));
        // Integral is pi, i.e. one half of 2*pi.
        assert_eq!(half_plus_half_cos2.theta_integral_core(), rat(1, 2));
    }

    #[test]
    fn normalize_rejects_runaway_frequency() {
        let raw = vec![RingTerm::new(rat(1, 1), [0, 0, 0], 0, Trig::Cos(65))];
        assert!(matches!(
            RingElement::normalize(raw),
            Err(RingError::LimitExceeded { .. })
        ));
    }

    #[test]
    fn antiderivative_of_pure_trig() {
        let e = cos1();
        let f = e.theta_antiderivative().unwrap();
        assert_eq!(f, sin1());
        assert!(RingElement::one().theta_antiderivative().is_err());
    }

    #[test]
    fn chart_point_reduces_theta_and_validates_radius() {
        let p = ChartPoint::new(2.0 * PI + 1.0, [0.0, 0.0, 0.0]).unwrap();
        assert!((p.theta() - 1.0).abs() < 1e-12);
        assert!(ChartPoint::new(0.0, [1.0, 1.0, 0.0]).is_err());
        assert!(ChartPoint::sphere(0.0, [0.6, 0.8, 0.0]).is_ok());
        assert!(ChartPoint::sphere(0.0, [0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn serde_round_trip_preserves_canonical_form() {
        let e = &(&RingElement::x1() * &RingElement::exp_x3(1)) * &cos1()
            + &RingElement::sin_theta(3).scale(&rat(-7, 3));
        let json = serde_json::to_string(&e).unwrap();
        let back: RingElement = serde_json::from_str(&json).unwrap();
        assert_eq!(e, back);
    }
}

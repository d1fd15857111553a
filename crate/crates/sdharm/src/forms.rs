//! Graded exterior algebra on the chart, with exact coefficients.
//!
//! Basis covectors are ordered `(dθ, dx1, dx2, dx3)` and a multi-index
//! is stored as a four-bit mask (bit 0 = `dθ`). The orientation is
//! fixed once and for all by `dθ∧dx1∧dx2∧dx3 > 0`; every Hodge sign
//! below follows from it.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ring::{rat, Rational, RingElement, RingError, Var};

pub const MASK_THETA: u8 = 1 << 0;
pub const MASK_X1: u8 = 1 << 1;
pub const MASK_X2: u8 = 1 << 2;
pub const MASK_X3: u8 = 1 << 3;
pub const MASK_VOL: u8 = 0b1111;
const MASK_SPATIAL: u8 = 0b1110;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("wedge product exceeds top degree: {0}")]
    DegreeOverflow(u32),
    #[error("interior product needs a form of degree >= 1")]
    DegreeUnderflow,
    #[error("operation restricted to the D^3 factor, but the form has a dθ component")]
    ContainsTheta,
    #[error("expected a form of degree {expected}, got degree {got}")]
    WrongDegree { expected: u8, got: u8 },
    #[error("unsupported chart map: {0}")]
    UnsupportedMap(String),
    #[error("invalid component key `{0}`")]
    BadComponentKey(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Sign of sorting `e_a ∧ e_b` into ascending order; 0 when the masks
/// overlap.
pub fn wedge_sign(a: u8, b: u8) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0u32;
    for j in 0..4 {
        if b & (1 << j) != 0 {
            inversions += (a >> (j + 1)).count_ones();
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn mask_key(mask: u8) -> String {
    let mut s = String::new();
    if mask & MASK_THETA != 0 {
        s.push('θ');
    }
    for i in 1..4 {
        if mask & (1 << i) != 0 {
            s.push(char::from_digit(i as u32, 10).unwrap());
        }
    }
    s
}

fn key_mask(key: &str) -> Result<u8, FormError> {
    let mut mask = 0u8;
    for ch in key.chars() {
        let bit = match ch {
            'θ' | 't' => MASK_THETA,
            '1' => MASK_X1,
            '2' => MASK_X2,
            '3' => MASK_X3,
            _ => return Err(FormError::BadComponentKey(key.into())),
        };
        if mask & bit != 0 {
            return Err(FormError::BadComponentKey(key.into()));
        }
        mask |= bit;
    }
    Ok(mask)
}

/// A differential form of homogeneous degree with [`RingElement`]
/// components over sorted multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffForm {
    degree: u8,
    comps: BTreeMap<u8, RingElement>,
}

impl DiffForm {
    pub fn zero(degree: u8) -> DiffForm {
        assert!(degree <= 4, "degree out of range");
        DiffForm {
            degree,
            comps: BTreeMap::new(),
        }
    }

    pub fn scalar(e: RingElement) -> DiffForm {
        let mut f = DiffForm::zero(0);
        f.set(0, e);
        f
    }

    /// The basis covector `dθ`, `dx1`, `dx2` or `dx3`.
    pub fn basis1(v: Var) -> DiffForm {
        let mut f = DiffForm::zero(1);
        f.set(1 << v.index(), RingElement::one());
        f
    }

    pub fn one_form(components: [RingElement; 4]) -> DiffForm {
        let mut f = DiffForm::zero(1);
        for (i, c) in components.into_iter().enumerate() {
            f.set(1 << i, c);
        }
        f
    }

    pub fn from_components<I>(degree: u8, comps: I) -> DiffForm
    where
        I: IntoIterator<Item = (u8, RingElement)>,
    {
        let mut f = DiffForm::zero(degree);
        for (mask, e) in comps {
            assert_eq!(
                mask.count_ones(),
                degree as u32,
                "component mask does not match the stated degree"
            );
            let merged = f.component(mask) + e;
            f.set(mask, merged);
        }
        f
    }

    fn set(&mut self, mask: u8, e: RingElement) {
        debug_assert_eq!(mask.count_ones(), self.degree as u32);
        if e.is_zero() {
            self.comps.remove(&mask);
        } else {
            self.comps.insert(mask, e);
        }
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    /// Component at a multi-index mask (zero when absent).
    pub fn component(&self, mask: u8) -> RingElement {
        self.comps.get(&mask).cloned().unwrap_or_default()
    }

    pub fn components(&self) -> impl Iterator<Item = (u8, &RingElement)> {
        self.comps.iter().map(|(m, e)| (*m, e))
    }

    pub fn scale(&self, c: &Rational) -> DiffForm {
        if c.is_zero() {
            return DiffForm::zero(self.degree);
        }
        DiffForm {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(m, e)| (*m, e.scale(c)))
                .collect(),
        }
    }

    pub fn scale_elem(&self, e: &RingElement) -> DiffForm {
        let mut out = DiffForm::zero(self.degree);
        for (mask, c) in &self.comps {
            out.set(*mask, e * c);
        }
        out
    }

    /// Graded-antisymmetric product with exact sign bookkeeping.
    pub fn wedge(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        let degree = self.degree as u32 + other.degree as u32;
        if degree > 4 {
            return Err(FormError::DegreeOverflow(degree));
        }
        let mut out = DiffForm::zero(degree as u8);
        for (ma, ea) in &self.comps {
            for (mb, eb) in &other.comps {
                let sign = wedge_sign(*ma, *mb);
                if sign == 0 {
                    continue;
                }
                let mut prod = ea * eb;
                if sign < 0 {
                    prod = -prod;
                }
                let mask = ma | mb;
                let merged = out.component(mask) + prod;
                out.set(mask, merged);
            }
        }
        Ok(out)
    }

    /// Exact exterior derivative; `d∘d = 0` identically.
    pub fn ext_d(&self) -> DiffForm {
        if self.degree == 4 {
            return DiffForm::zero(4);
        }
        let mut out = DiffForm::zero(self.degree + 1);
        for (mask, e) in &self.comps {
            for v in Var::ALL {
                let bit = 1u8 << v.index();
                let sign = wedge_sign(bit, *mask);
                if sign == 0 {
                    continue;
                }
                let mut de = e.partial(v);
                if de.is_zero() {
                    continue;
                }
                if sign < 0 {
                    de = -de;
                }
                let m = mask | bit;
                let merged = out.component(m) + de;
                out.set(m, merged);
            }
        }
        out
    }

    /// Hodge star for the flat product metric in four dimensions.
    pub fn hodge4(&self) -> DiffForm {
        let mut out = DiffForm::zero(4 - self.degree);
        for (mask, e) in &self.comps {
            let comp = MASK_VOL ^ mask;
            let sign = wedge_sign(*mask, comp);
            debug_assert!(sign != 0);
            let val = if sign < 0 { -e } else { e.clone() };
            let merged = out.component(comp) + val;
            out.set(comp, merged);
        }
        out
    }

    /// Hodge star for the flat metric on the `D^3` factor, with
    /// `dx1∧dx2∧dx3` positive; `θ` enters only as a parameter.
    pub fn hodge3(&self) -> Result<DiffForm, FormError> {
        if self.comps.keys().any(|m| m & MASK_THETA != 0) {
            return Err(FormError::ContainsTheta);
        }
        if self.degree > 3 {
            return Err(FormError::WrongDegree {
                expected: 3,
                got: self.degree,
            });
        }
        let mut out = DiffForm::zero(3 - self.degree);
        for (mask, e) in &self.comps {
            let comp = MASK_SPATIAL ^ mask;
            let sign = wedge_sign(*mask, comp);
            debug_assert!(sign != 0);
            let val = if sign < 0 { -e } else { e.clone() };
            let merged = out.component(comp) + val;
            out.set(comp, merged);
        }
        Ok(out)
    }

    /// Interior product with a vector field given by its four
    /// components along `(∂θ, ∂x1, ∂x2, ∂x3)`.
    pub fn interior(&self, v: &[RingElement; 4]) -> Result<DiffForm, FormError> {
        if self.degree == 0 {
            return Err(FormError::DegreeUnderflow);
        }
        let mut out = DiffForm::zero(self.degree - 1);
        for (mask, e) in &self.comps {
            let mut position = 0u32;
            for i in 0..4 {
                let bit = 1u8 << i;
                if mask & bit == 0 {
                    continue;
                }
                if !v[i].is_zero() {
                    let mut term = &v[i] * e;
                    if position % 2 == 1 {
                        term = -term;
                    }
                    let m = mask & !bit;
                    let merged = out.component(m) + term;
                    out.set(m, merged);
                }
                position += 1;
            }
        }
        Ok(out)
    }

    /// Exact pullback by an affine chart map.
    pub fn pullback(&self, map: &AffineChartMap) -> Result<DiffForm, FormError> {
        let mut out = DiffForm::zero(self.degree);
        for (mask, e) in &self.comps {
            let coeff = map.substitute(e)?;
            let (target, sign) = map.pull_basis(*mask);
            let mut val = coeff;
            if sign < 0 {
                val = -val;
            }
            let merged = out.component(target) + val;
            out.set(target, merged);
        }
        Ok(out)
    }

    /// The antisymmetric matrix `M[i][j] = ω(e_i, e_j)` of a 2-form,
    /// evaluated at raw coordinates.
    pub fn two_form_matrix_at(&self, theta: f64, x: [f64; 3]) -> [[f64; 4]; 4] {
        debug_assert_eq!(self.degree, 2);
        let mut m = [[0.0; 4]; 4];
        for (mask, e) in &self.comps {
            let i = mask.trailing_zeros() as usize;
            let j = (7 - (mask & !(1 << i)).leading_zeros()) as usize;
            let v = e.eval_at(theta, x);
            m[i][j] += v;
            m[j][i] -= v;
        }
        m
    }

    /// Covector of a 1-form at raw coordinates.
    pub fn covector_at(&self, theta: f64, x: [f64; 3]) -> [f64; 4] {
        debug_assert_eq!(self.degree, 1);
        let mut out = [0.0; 4];
        for (mask, e) in &self.comps {
            out[mask.trailing_zeros() as usize] = e.eval_at(theta, x);
        }
        out
    }

    /// Restriction of every component to the core circle `x = 0`.
    pub fn restrict_core(&self) -> DiffForm {
        let mut out = DiffForm::zero(self.degree);
        for (mask, e) in &self.comps {
            out.set(*mask, e.restrict_core());
        }
        out
    }
}

impl Add for &DiffForm {
    type Output = DiffForm;
    fn add(self, rhs: &DiffForm) -> DiffForm {
        assert_eq!(self.degree, rhs.degree, "degree mismatch in sum");
        let mut out = self.clone();
        for (mask, e) in &rhs.comps {
            let merged = out.component(*mask) + e.clone();
            out.set(*mask, merged);
        }
        out
    }
}

impl Sub for &DiffForm {
    type Output = DiffForm;
    fn sub(self, rhs: &DiffForm) -> DiffForm {
        self + &(-rhs)
    }
}

impl Neg for &DiffForm {
    type Output = DiffForm;
    fn neg(self) -> DiffForm {
        DiffForm {
            degree: self.degree,
            comps: self.comps.iter().map(|(m, e)| (*m, -e)).collect(),
        }
    }
}

impl Add for DiffForm {
    type Output = DiffForm;
    fn add(self, rhs: DiffForm) -> DiffForm {
        &self + &rhs
    }
}

impl Sub for DiffForm {
    type Output = DiffForm;
    fn sub(self, rhs: DiffForm) -> DiffForm {
        &self - &rhs
    }
}

impl Neg for DiffForm {
    type Output = DiffForm;
    fn neg(self) -> DiffForm {
        -&self
    }
}

impl Mul<&DiffForm> for &RingElement {
    type Output = DiffForm;
    fn mul(self, rhs: &DiffForm) -> DiffForm {
        rhs.scale_elem(self)
    }
}

impl fmt::Display for DiffForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.comps.is_empty() {
            return write!(f, "0");
        }
        let names = ["dθ", "dx1", "dx2", "dx3"];
        let mut first = true;
        for (mask, e) in &self.comps {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", e)?;
            for i in 0..4 {
                if mask & (1 << i) != 0 {
                    write!(f, "·{}", names[i])?;
                }
            }
        }
        Ok(())
    }
}

/// An affine map of the chart: a shift of `θ` by a quarter-turn
/// multiple together with a signed permutation of `(x1, x2, x3)`.
/// These are exactly the maps whose pullback keeps coefficients in the
/// ring; the glueing map of the unoriented model is
/// `(θ, x1, x2, x3) ↦ (θ - 2π, x1, -x2, -x3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineChartMap {
    /// θ-shift in units of π/2.
    quarter_turns: i64,
    /// `rows[i] = (j, s)` means the i-th output coordinate is `s * x_j`.
    rows: [(usize, i8); 3],
}

impl AffineChartMap {
    pub fn new(quarter_turns: i64, linear: [[i64; 3]; 3]) -> Result<AffineChartMap, FormError> {
        let mut rows = [(0usize, 0i8); 3];
        let mut seen = [false; 3];
        for (i, row) in linear.iter().enumerate() {
            let mut picked = None;
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 | -1 => {
                        if picked.is_some() {
                            return Err(FormError::UnsupportedMap(
                                "linear part must be a signed permutation".into(),
                            ));
                        }
                        picked = Some((j, v as i8));
                    }
                    _ => {
                        return Err(FormError::UnsupportedMap(
                            "linear part entries must be -1, 0 or 1".into(),
                        ))
                    }
                }
            }
            let (j, s) =
                picked.ok_or_else(|| FormError::UnsupportedMap("zero row in linear part".into()))?;
            if seen[j] {
                return Err(FormError::UnsupportedMap(
                    "linear part must be a signed permutation".into(),
                ));
            }
            seen[j] = true;
            rows[i] = (j, s);
        }
        Ok(AffineChartMap {
            quarter_turns,
            rows,
        })
    }

    /// Construct from a θ-shift that is a rational multiple of π. Only
    /// half-integer multiples keep trig coefficients rational.
    pub fn with_pi_shift(multiple: Rational, linear: [[i64; 3]; 3]) -> Result<AffineChartMap, FormError> {
        let doubled = &multiple * BigRational::from_integer(2.into());
        if !doubled.is_integer() {
            return Err(FormError::UnsupportedMap(format!(
                "θ-shift {multiple}·π is not a half-integer multiple of π"
            )));
        }
        let qt = doubled.to_integer().to_i64().ok_or_else(|| {
            FormError::UnsupportedMap("θ-shift out of range".into())
        })?;
        AffineChartMap::new(qt, linear)
    }

    pub fn identity() -> AffineChartMap {
        AffineChartMap::new(0, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]).unwrap()
    }

    /// The glueing map `{2π}×D^3 → {0}×D^3` of the unoriented model.
    pub fn deck() -> AffineChartMap {
        AffineChartMap::new(-4, [[1, 0, 0], [0, -1, 0], [0, 0, -1]]).unwrap()
    }

    pub fn theta_shift(&self) -> f64 {
        self.quarter_turns as f64 * std::f64::consts::FRAC_PI_2
    }

    /// Apply the map to raw coordinates.
    pub fn apply(&self, theta: f64, x: [f64; 3]) -> (f64, [f64; 3]) {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let (j, s) = self.rows[i];
            out[i] = s as f64 * x[j];
        }
        (theta + self.theta_shift(), out)
    }

    /// Apply only the linear part to a spatial vector.
    pub fn apply_linear(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let (j, s) = self.rows[i];
            out[i] = s as f64 * x[j];
        }
        out
    }

    /// Function composition `self ∘ other`.
    pub fn compose(&self, other: &AffineChartMap) -> AffineChartMap {
        let mut rows = [(0usize, 0i8); 3];
        for i in 0..3 {
            let (j, s) = self.rows[i];
            let (k, t) = other.rows[j];
            rows[i] = (k, s * t);
        }
        AffineChartMap {
            quarter_turns: self.quarter_turns + other.quarter_turns,
            rows,
        }
    }

    pub fn det(&self) -> i64 {
        // Sign of the permutation times the product of entry signs.
        let perm: Vec<usize> = self.rows.iter().map(|(j, _)| *j).collect();
        let mut sign = 1i64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                if perm[i] > perm[j] {
                    sign = -sign;
                }
            }
        }
        for (_, s) in self.rows {
            sign *= s as i64;
        }
        sign
    }

    pub fn is_orientation_preserving(&self) -> bool {
        self.det() > 0
    }

    /// Coefficient substitution `f ↦ f ∘ map`, exact in the ring.
    pub fn substitute(&self, e: &RingElement) -> Result<RingElement, FormError> {
        use crate::ring::{RingTerm, Trig};
        let mut raw: Vec<RingTerm> = Vec::new();
        // Where does x3 come from under the map? Needed for e^(k*x3).
        let x3_source = self.rows[2];
        for t in e.terms() {
            let mut coeff = t.coeff.clone();
            let mut powers = [0u32; 3];
            for i in 0..3 {
                let (j, s) = self.rows[i];
                powers[j] += t.powers[i];
                if s < 0 && t.powers[i] % 2 == 1 {
                    coeff = -coeff;
                }
            }
            let exp_rate = if t.exp_rate == 0 {
                0
            } else {
                let (j, s) = x3_source;
                if j != 2 {
                    return Err(FormError::UnsupportedMap(
                        "e^(k x3) coefficient under a map that does not send x3 to ±x3".into(),
                    ));
                }
                s as i32 * t.exp_rate
            };
            match t.trig {
                Trig::One => raw.push(RingTerm::new(coeff, powers, exp_rate, Trig::One)),
                Trig::Cos(m) | Trig::Sin(m) => {
                    // trig(m(θ + q·π/2)) expanded with cos/sin of the
                    // phase, each in {-1, 0, 1}.
                    let phase = (m as i64 * self.quarter_turns).rem_euclid(4);
                    let (c, s) = match phase {
                        0 => (1i64, 0i64),
                        1 => (0, 1),
                        2 => (-1, 0),
                        _ => (0, -1),
                    };
                    let is_sin = matches!(t.trig, Trig::Sin(_));
                    // cos(mθ+φ) = cosφ cos - sinφ sin
                    // sin(mθ+φ) = sinφ cos + cosφ sin
                    let (cos_part, sin_part) = if is_sin { (s, c) } else { (c, -s) };
                    if cos_part != 0 {
                        raw.push(RingTerm::new(
                            &coeff * rat(cos_part, 1),
                            powers,
                            exp_rate,
                            Trig::Cos(m),
                        ));
                    }
                    if sin_part != 0 {
                        raw.push(RingTerm::new(
                            &coeff * rat(sin_part, 1),
                            powers,
                            exp_rate,
                            Trig::Sin(m),
                        ));
                    }
                }
            }
        }
        Ok(RingElement::normalize(raw)?)
    }

    /// Image of a basis multi-index under the pullback, with its sign.
    fn pull_basis(&self, mask: u8) -> (u8, i32) {
        let mut bits: Vec<usize> = Vec::with_capacity(4);
        let mut sign = 1i32;
        for i in 0..4 {
            if mask & (1 << i) == 0 {
                continue;
            }
            if i == 0 {
                bits.push(0);
            } else {
                let (j, s) = self.rows[i - 1];
                bits.push(j + 1);
                sign *= s as i32;
            }
        }
        // Sort the image indices, tracking the permutation sign.
        let mut target = 0u8;
        for k in 0..bits.len() {
            for l in (k + 1)..bits.len() {
                if bits[k] > bits[l] {
                    bits.swap(k, l);
                    sign = -sign;
                }
            }
            target |= 1 << bits[k];
        }
        (target, sign)
    }
}

impl Serialize for DiffForm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            degree: u8,
            components: BTreeMap<String, &'a RingElement>,
        }
        let components = self
            .comps
            .iter()
            .map(|(m, e)| (mask_key(*m), e))
            .collect();
        Repr {
            degree: self.degree,
            components,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiffForm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<DiffForm, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            degree: u8,
            components: BTreeMap<String, RingElement>,
        }
        let repr = Repr::deserialize(deserializer)?;
        if repr.degree > 4 {
            return Err(D::Error::custom("degree out of range"));
        }
        let mut form = DiffForm::zero(repr.degree);
        for (key, e) in repr.components {
            let mask = key_mask(&key).map_err(D::Error::custom)?;
            if mask.count_ones() != repr.degree as u32 {
                return Err(D::Error::custom(format!(
                    "component `{key}` does not have degree {}",
                    repr.degree
                )));
            }
            let merged = form.component(mask) + e;
            form.set(mask, merged);
        }
        Ok(form)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingElement as R;

    fn d_theta() -> DiffForm {
        DiffForm::basis1(Var::Theta)
    }
    fn dx(i: usize) -> DiffForm {
        DiffForm::basis1(Var::from_index(i))
    }

    #[test]
    fn wedge_is_antisymmetric_on_basis() {
        let a = d_theta().wedge(&dx(1)).unwrap();
        let b = dx(1).wedge(&d_theta()).unwrap();
        assert_eq!(a, -&b);
        assert_eq!(a.component(MASK_THETA | MASK_X1), R::one());
    }

    #[test]
    fn wedge_degree_overflow_is_an_error() {
        let vol = d_theta()
            .wedge(&dx(1))
            .unwrap()
            .wedge(&dx(2))
            .unwrap()
            .wedge(&dx(3))
            .unwrap();
        assert!(matches!(
            vol.wedge(&d_theta()),
            Err(FormError::DegreeOverflow(5))
        ));
    }

    #[test]
    fn ext_d_of_x1_dx2() {
        let f = DiffForm::from_components(1, [(MASK_X2, R::x1())]);
        let d = f.ext_d();
        assert_eq!(d.component(MASK_X1 | MASK_X2), R::one());
        assert_eq!(d.components().count(), 1);
    }

    #[test]
    fn d_squared_vanishes() {
        let mixed = &(&R::x1() * &R::exp_x3(1)) * &R::cos_theta(2);
        let f = DiffForm::from_components(1, [(MASK_X2, mixed), (MASK_THETA, R::x3())]);
        assert!(f.ext_d().ext_d().is_zero());
    }

    #[test]
    fn hodge4_on_two_forms() {
        let f = d_theta().wedge(&dx(1)).unwrap();
        let star = f.hodge4();
        assert_eq!(star.component(MASK_X2 | MASK_X3), R::one());
        assert_eq!(star.hodge4(), f);
    }

    #[test]
    fn hodge3_basics() {
        assert_eq!(
            dx(1).hodge3().unwrap(),
            dx(2).wedge(&dx(3)).unwrap()
        );
        assert_eq!(
            dx(1).wedge(&dx(2)).unwrap().hodge3().unwrap(),
            dx(3)
        );
        assert!(matches!(d_theta().hodge3(), Err(FormError::ContainsTheta)));
    }

    #[test]
    fn interior_with_dtheta_direction() {
        let f = d_theta().wedge(&dx(3)).unwrap();
        let v = [R::one(), R::zero(), R::zero(), R::zero()];
        assert_eq!(f.interior(&v).unwrap(), dx(3));
        assert!(matches!(
            DiffForm::scalar(R::one()).interior(&v),
            Err(FormError::DegreeUnderflow)
        ));
    }

    #[test]
    fn deck_map_is_orientation_preserving_involution_on_x() {
        let deck = AffineChartMap::deck();
        assert_eq!(deck.det(), 1);
        assert!(deck.is_orientation_preserving());
        let twice = deck.compose(&deck);
        assert_eq!(twice.apply_linear([0.3, -0.4, 0.5]), [0.3, -0.4, 0.5]);
    }

    #[test]
    fn identity_pullback_is_identity() {
        let id = AffineChartMap::identity();
        let f = DiffForm::from_components(
            2,
            [
                (MASK_THETA | MASK_X1, &R::x2() * &R::cos_theta(1)),
                (MASK_X2 | MASK_X3, R::exp_x3(2)),
            ],
        );
        assert_eq!(f.pullback(&id).unwrap(), f);
    }

    #[test]
    fn pullback_functoriality_on_sample() {
        let a = AffineChartMap::new(1, [[0, 1, 0], [-1, 0, 0], [0, 0, 1]]).unwrap();
        let b = AffineChartMap::deck();
        let f = DiffForm::from_components(
            2,
            [
                (MASK_THETA | MASK_X2, &R::x1() * &R::sin_theta(3)),
                (MASK_X1 | MASK_X3, &R::x3() * &R::cos_theta(1)),
            ],
        );
        let composed = a.compose(&b);
        let lhs = f.pullback(&composed).unwrap();
        let rhs = f.pullback(&a).unwrap().pullback(&b).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn substitution_rejects_exp_under_axis_swap() {
        let swap = AffineChartMap::new(0, [[0, 0, 1], [0, 1, 0], [1, 0, 0]]).unwrap();
        let f = DiffForm::scalar(R::exp_x3(1));
        assert!(matches!(
            f.pullback(&swap),
            Err(FormError::UnsupportedMap(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let f = DiffForm::from_components(
            2,
            [
                (MASK_THETA | MASK_X1, R::x1()),
                (MASK_X2 | MASK_X3, &R::x2() * &R::exp_x3(1)),
            ],
        );
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("θ1"));
        let back: DiffForm = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }
}

//! The two model forms vanishing on the core circle, their
//! linearization along it, and the Z/2 classification of the eigenline
//! splitting by monodromy.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::{Matrix3, Vector3};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{AffineChartMap, DiffForm, FormError, MASK_THETA, MASK_VOL};
use crate::ring::{rat, Rational, RingElement, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("R must satisfy 0 < R < 1, got {0}")]
    InvalidR(String),
    #[error("form does not vanish on the core circle x = 0")]
    NonvanishingOnCore,
    #[error("form has an anti-self-dual part at first order along the core")]
    NotSelfDualFirstOrder,
    #[error("linearization vanishes identically; the zero circle is degenerate")]
    DegenerateLinearization,
    #[error("linearization is degenerate near θ = {theta}")]
    DegenerateAt { theta: f64 },
    #[error("eigenline moved too fast between samples near θ = {theta} (|dot| = {dot}); increase sample_count")]
    SamplingTooCoarse { theta: f64, dot: f64 },
    #[error("expected a 2-form, got degree {0}")]
    NotATwoForm(u8),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Which local model to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// The S^1-invariant oriented model with linearization diag(1,1,-2).
    A,
    /// The explicit unoriented model, with parameter 0 < R < 1.
    BExplicit(#[serde(with = "crate::ring::rational_serde")] Rational),
    /// The unoriented model produced by glueing the oriented chart form
    /// with the deck map (θ, x1, x2, x3) ↦ (θ - 2π, x1, -x2, -x3).
    BGlued,
}

/// A model form on the chart, together with the glueing map when the
/// model lives on the quotient.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub form: DiffForm,
    pub glue: Option<AffineChartMap>,
}

/// Self-dual basis 2-form `dθ∧dx_i + dx_j∧dx_k`, (i,j,k) cyclic,
/// for `i` in `1..=3`.
pub fn sd_basis(i: usize) -> DiffForm {
    assert!((1..=3).contains(&i));
    let j = i % 3 + 1;
    let k = j % 3 + 1;
    let d = |n: usize| DiffForm::basis1(Var::from_index(n));
    &d(0).wedge(&d(i)).unwrap() + &d(j).wedge(&d(k)).unwrap()
}

/// The oriented chart form
/// `x1·u1 + x2·u2 - 2x3·u3` with `u_i` the self-dual basis.
pub fn oriented_form() -> DiffForm {
    let x = [RingElement::x1(), RingElement::x2(), RingElement::x3()];
    &(&x[0] * &sd_basis(1)) + &(&(&x[1] * &sd_basis(2)) + &(&x[2].scale(&rat(-2, 1)) * &sd_basis(3)))
}

/// The explicit unoriented chart form with parameter `R`.
pub fn unoriented_form(r: &Rational) -> DiffForm {
    let e = RingElement::exp_x3(1);
    let c1 = &(&(&RingElement::x1() * &RingElement::cos_theta(1))
        + &(&RingElement::x2() * &RingElement::sin_theta(1)))
        * &e;
    let c2 = &(&(&RingElement::x1() * &RingElement::sin_theta(1))
        - &(&RingElement::x2() * &RingElement::cos_theta(1)))
        * &e;
    let swirl = &(&c1 * &sd_basis(1)) + &(&c2 * &sd_basis(2));
    let axial = &(&RingElement::x1().scale(&rat(-1, 1)) * &sd_basis(1))
        + &(&RingElement::x3() * &sd_basis(3));
    &swirl + &axial.scale(r)
}

/// Build a model form from its spec.
pub fn make_model(spec: ModelSpec) -> Result<Model, ModelError> {
    match spec {
        ModelSpec::A => Ok(Model {
            spec: ModelSpec::A,
            form: oriented_form(),
            glue: None,
        }),
        ModelSpec::BExplicit(r) => {
            if r <= Rational::zero() || r >= Rational::from_integer(1.into()) {
                return Err(ModelError::InvalidR(r.to_string()));
            }
            let form = unoriented_form(&r);
            Ok(Model {
                spec: ModelSpec::BExplicit(r),
                form,
                glue: None,
            })
        }
        ModelSpec::BGlued => {
            let form = oriented_form();
            let glue = AffineChartMap::deck();
            let pulled = form.pullback(&glue)?;
            assert!(
                (&pulled - &form).is_zero(),
                "glueing map must preserve the chart form exactly"
            );
            Ok(Model {
                spec: ModelSpec::BGlued,
                form,
                glue: Some(glue),
            })
        }
    }
}

/// The 3x3 matrix function `θ ↦ L(θ)` of first-order coefficients of a
/// form along the core circle.
#[derive(Debug, Clone, PartialEq)]
pub struct LPath {
    entries: [[RingElement; 3]; 3],
    pub sample_count: usize,
}

/// Result of the exact symmetry / trace checks on an [`LPath`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub traceless: bool,
}

impl LPath {
    pub fn new(entries: [[RingElement; 3]; 3]) -> LPath {
        LPath {
            entries,
            sample_count: 360,
        }
    }

    pub fn with_sample_count(mut self, n: usize) -> LPath {
        self.sample_count = n;
        self
    }

    pub fn from_constant(m: [[i64; 3]; 3]) -> LPath {
        LPath::new(m.map(|row| row.map(RingElement::int)))
    }

    pub fn entry(&self, i: usize, j: usize) -> &RingElement {
        &self.entries[i][j]
    }

    pub fn negated(&self) -> LPath {
        LPath {
            entries: self.entries.clone().map(|row| row.map(|e| -e)),
            sample_count: self.sample_count,
        }
    }

    pub fn eval_at(&self, theta: f64) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.entries[i][j].eval_at(theta, [0.0; 3]))
    }

    /// Exact symbolic determinant.
    pub fn det_element(&self) -> RingElement {
        let e = &self.entries;
        let m = |i: usize, j: usize| e[i][j].clone();
        let c0 = &m(1, 1) * &m(2, 2) - &m(1, 2) * &m(2, 1);
        let c1 = &m(1, 0) * &m(2, 2) - &m(1, 2) * &m(2, 0);
        let c2 = &m(1, 0) * &m(2, 1) - &m(1, 1) * &m(2, 0);
        &m(0, 0) * &c0 - &(&m(0, 1) * &c1) + &m(0, 2) * &c2
    }

    /// Exact checks `L = Lᵀ` and `tr L = 0`.
    pub fn check_symmetric_traceless(&self) -> SymmetryReport {
        let mut symmetric = true;
        for i in 0..3 {
            for j in (i + 1)..3 {
                if !(&self.entries[i][j] - &self.entries[j][i]).is_zero() {
                    symmetric = false;
                }
            }
        }
        let trace = &(&self.entries[0][0] + &self.entries[1][1]) + &self.entries[2][2];
        SymmetryReport {
            symmetric,
            traceless: trace.is_zero(),
        }
    }
}

/// First-order data of a 2-form along the core: the linearization
/// matrix path and the quadratic-or-higher tail.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub path: LPath,
    pub tail: DiffForm,
}

/// Full self-dual coefficient functions `c_i` of a 2-form written as
/// `Σ c_i (dθ∧dx_i + dx_j∧dx_k)`; the anti-self-dual residues are
/// returned alongside.
fn sd_coefficients(w: &DiffForm) -> Result<([RingElement; 3], [RingElement; 3]), ModelError> {
    if w.degree() != 2 {
        return Err(ModelError::NotATwoForm(w.degree()));
    }
    let mut sd: [RingElement; 3] = Default::default();
    let mut asd: [RingElement; 3] = Default::default();
    let half = rat(1, 2);
    for i in 1..=3usize {
        let a = w.component(MASK_THETA | (1 << i));
        // The cyclic partner dx_j∧dx_k, with the sign from sorting.
        let j = i % 3 + 1;
        let k = j % 3 + 1;
        let mask = (1u8 << j) | (1u8 << k);
        let b = if j < k {
            w.component(mask)
        } else {
            -w.component(mask)
        };
        sd[i - 1] = (&a + &b).scale(&half);
        asd[i - 1] = (&a - &b).scale(&half);
    }
    Ok((sd, asd))
}

/// Extract the linearization `L_ij(θ) = ∂(sd_i)/∂x_j |_(x=0)` of a form
/// vanishing on the core circle, together with its quadratic tail.
pub fn extract_linearization(w: &DiffForm) -> Result<Linearization, ModelError> {
    if w.degree() != 2 {
        return Err(ModelError::NotATwoForm(w.degree()));
    }
    for (_, e) in w.components() {
        if !e.restrict_core().is_zero() {
            return Err(ModelError::NonvanishingOnCore);
        }
    }
    let (sd, asd) = sd_coefficients(w)?;
    let xs = [Var::X1, Var::X2, Var::X3];
    for a in &asd {
        for &v in &xs {
            if !a.partial(v).restrict_core().is_zero() {
                return Err(ModelError::NotSelfDualFirstOrder);
            }
        }
    }
    let mut entries: [[RingElement; 3]; 3] = Default::default();
    let mut all_zero = true;
    for i in 0..3 {
        for (j, &v) in xs.iter().enumerate() {
            let lij = sd[i].partial(v).restrict_core();
            if !lij.is_zero() {
                all_zero = false;
            }
            entries[i][j] = lij;
        }
    }
    if all_zero {
        return Err(ModelError::DegenerateLinearization);
    }
    // Linear part Σ_i (Σ_j L_ij x_j) u_i, subtracted to leave the tail.
    let coords = [RingElement::x1(), RingElement::x2(), RingElement::x3()];
    let mut linear = DiffForm::zero(2);
    for i in 0..3 {
        let mut li = RingElement::zero();
        for j in 0..3 {
            li = li + &entries[i][j] * &coords[j];
        }
        linear = &linear + &(&li * &sd_basis(i + 1));
    }
    let tail = w - &linear;
    Ok(Linearization {
        path: LPath::new(entries),
        tail,
    })
}

/// The exact closedness relations for a form `Σ c_i u_i` in self-dual
/// shape: the divergence `Σ_i ∂c_i/∂x_i` and, for each cyclic triple
/// `(i,j,k)`, the defect `∂c_i/∂θ - ∂c_k/∂x_j + ∂c_j/∂x_k`. The form is
/// closed exactly when all four vanish; the sign convention here is the
/// one produced by expanding the exterior derivative.
pub fn closedness_relations(w: &DiffForm) -> Result<(RingElement, [RingElement; 3]), ModelError> {
    let (sd, _) = sd_coefficients(w)?;
    let xs = [Var::X1, Var::X2, Var::X3];
    let mut div = RingElement::zero();
    for i in 0..3 {
        div = div + sd[i].partial(xs[i]);
    }
    let mut curl: [RingElement; 3] = Default::default();
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        curl[i] = &sd[i].partial(Var::Theta) - &(&sd[k].partial(xs[j]) - &sd[j].partial(xs[k]));
    }
    Ok((div, curl))
}

/// Oriented / unoriented verdict with the ±1 eigenline monodromy that
/// decides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Splitting {
    Oriented,
    Unoriented,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingClass {
    pub value: Splitting,
    pub monodromy_sign: i8,
    /// Smallest spectral gap between the tracked simple eigenvalue and
    /// the rest, over all samples.
    pub min_gap: f64,
    pub samples: usize,
}

const EIGEN_DEGENERACY_EPS: f64 = 1e-9;

/// Classify the splitting of an [`LPath`] by tracking the eigenline of
/// its simple (minority-sign) eigenvalue once around the circle.
///
/// Tracelessness and nondegeneracy force the signature to be (2,1) or
/// (1,2) for every θ, so the minority-sign eigenvalue is simple and its
/// line varies continuously; the full rank-2 eigenspace need not.
pub fn classify_splitting(path: &LPath) -> Result<SplittingClass, ModelError> {
    classify_with_deck(path, None)
}

/// Classification for a glued model: the eigenline at θ = 2π is
/// compared against the deck image of the eigenline at θ = 0.
pub fn classify_glued(path: &LPath, deck: &AffineChartMap) -> Result<SplittingClass, ModelError> {
    classify_with_deck(path, Some(deck))
}

fn classify_with_deck(
    path: &LPath,
    deck: Option<&AffineChartMap>,
) -> Result<SplittingClass, ModelError> {
    let n = path.sample_count.max(4);
    let mut first: Option<Vector3<f64>> = None;
    let mut prev: Option<Vector3<f64>> = None;
    let mut minority_sign: Option<f64> = None;
    let mut min_gap = f64::INFINITY;
    for k in 0..=n {
        let theta = TAU * k as f64 / n as f64;
        let m = path.eval_at(theta);
        let scale = m.norm().max(1.0);
        let eig = nalgebra::SymmetricEigen::new(m);
        let vals = eig.eigenvalues;
        let mut pos = Vec::new();
        let mut negs = Vec::new();
        for (i, &v) in vals.iter().enumerate() {
            if v.abs() < EIGEN_DEGENERACY_EPS * scale {
                return Err(ModelError::DegenerateAt { theta });
            }
            if v > 0.0 {
                pos.push(i);
            } else {
                negs.push(i);
            }
        }
        let (idx, sign) = match (pos.len(), negs.len()) {
            (1, 2) => (pos[0], 1.0),
            (2, 1) => (negs[0], -1.0),
            _ => return Err(ModelError::DegenerateAt { theta }),
        };
        match minority_sign {
            None => minority_sign = Some(sign),
            Some(s) if s != sign => return Err(ModelError::DegenerateAt { theta }),
            _ => {}
        }
        let gap = (0..3)
            .filter(|&i| i != idx)
            .map(|i| (vals[i] - vals[idx]).abs())
            .fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(gap);
        let mut v = eig.eigenvectors.column(idx).into_owned();
        v.normalize_mut();
        if let Some(p) = &prev {
            let dot = p.dot(&v);
            if dot.abs() < FRAC_1_SQRT_2 {
                return Err(ModelError::SamplingTooCoarse { theta, dot });
            }
            if dot < 0.0 {
                v = -v;
            }
        } else {
            first = Some(v.clone());
        }
        prev = Some(v);
    }
    let start = first.expect("loop ran");
    let end = prev.expect("loop ran");
    let reference = match deck {
        None => start,
        Some(map) => {
            let image = map.apply_linear([start[0], start[1], start[2]]);
            Vector3::from_column_slice(&image)
        }
    };
    let closure = end.dot(&reference);
    let monodromy_sign = if closure >= 0.0 { 1i8 } else { -1i8 };
    Ok(SplittingClass {
        value: if monodromy_sign == 1 {
            Splitting::Oriented
        } else {
            Splitting::Unoriented
        },
        monodromy_sign,
        min_gap,
        samples: n,
    })
}

/// The volume density `λ²`: the coefficient of the volume form in
/// `½ ω∧ω`. Nonnegative exactly where the form is self-dual-like and
/// zero exactly where it degenerates.
pub fn volume_density(w: &DiffForm) -> Result<RingElement, ModelError> {
    if w.degree() != 2 {
        return Err(ModelError::NotATwoForm(w.degree()));
    }
    let ww = w.wedge(w)?;
    Ok(ww.component(MASK_VOL).scale(&rat(1, 2)))
}

/// Rectangular scan grid over the chart.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_samples: usize,
    pub x_samples: usize,
    pub radius: f64,
    /// When true, the axis grids are offset so that x = 0 is excluded.
    pub exclude_core: bool,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            theta_samples: 16,
            x_samples: 9,
            radius: 1.0,
            exclude_core: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub min_density: f64,
    pub argmin: (f64, [f64; 3]),
    /// Grid points where the density vanishes (below `1e-12`).
    pub zeros: Vec<(f64, [f64; 3])>,
}

const SCAN_ZERO_TOL: f64 = 1e-12;

/// Evaluate the volume density over a grid, reporting its minimum and
/// every grid zero.
pub fn nondegeneracy_scan(w: &DiffForm, grid: &GridSpec) -> Result<ScanReport, ModelError> {
    let density = volume_density(w)?;
    let mut min_density = f64::INFINITY;
    let mut argmin = (0.0, [0.0; 3]);
    let mut zeros = Vec::new();
    let n = grid.x_samples.max(2);
    let axis: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let v = grid.radius * (2.0 * t - 1.0);
            if grid.exclude_core {
                v + grid.radius / (n as f64 * 2.0)
            } else {
                v
            }
        })
        .collect();
    for ti in 0..grid.theta_samples.max(1) {
        let theta = TAU * ti as f64 / grid.theta_samples.max(1) as f64;
        for &x1 in &axis {
            for &x2 in &axis {
                for &x3 in &axis {
                    let x = [x1, x2, x3];
                    if x.iter().map(|v| v * v).sum::<f64>() > grid.radius * grid.radius {
                        continue;
                    }
                    let v = density.eval_at(theta, x);
                    if v < min_density {
                        min_density = v;
                        argmin = (theta, x);
                    }
                    if v.abs() <= SCAN_ZERO_TOL {
                        zeros.push((theta, x));
                    }
                }
            }
        }
    }
    Ok(ScanReport {
        min_density,
        argmin,
        zeros,
    })
}

//! The Moser argument as an executable pipeline.
//!
//! Given a linear family `ω_t = (1-t)ω0 + t·ω1` of closed 2-forms on
//! the chart, the pipeline finds a primitive `η̃` of `β = ω1 - ω0` via
//! the radial cone homotopy on the `D^3` factor, fixes the gauge by
//! subtracting `d(χ·f)` where `f` is the second-order Taylor model of a
//! potential and `χ` a damping profile, solves `i_X ω_t = -η`
//! pointwise, and integrates the resulting non-autonomous field with
//! classical RK4. For an exact pipeline the time-one map pulls `ω1`
//! back to `ω0`; the defect is measured with finite-difference
//! Jacobians and reported per particle.

use std::f64::consts::TAU;

use nalgebra::{Matrix4, Vector4};
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{DiffForm, FormError, MASK_THETA, MASK_X1, MASK_X2, MASK_X3};
use crate::models::{
    classify_splitting, extract_linearization, ModelError, SplittingClass,
};
use crate::ring::{ChartPoint, Rational, RingElement, RingError, Var};

#[derive(Debug, Error)]
pub enum MoserError {
    #[error("the input 2-form is not closed")]
    NotClosed,
    #[error("η̃ has loop integral {value}·2π along the core circle; the correction requires 0")]
    NonzeroLoopIntegral { value: String },
    #[error("ω_t is singular at t = {t}, θ = {theta}, |x| = {x_norm}; {hint}")]
    SingularMatrix {
        t: f64,
        theta: f64,
        x_norm: f64,
        hint: String,
    },
    #[error("family is degenerate off the core circle: {0}")]
    DegenerateFamily(String),
    #[error("splitting classes differ: source is {found:?}, target is {target:?}; grafting across classes is not defined")]
    ClassMismatch {
        found: crate::models::Splitting,
        target: crate::models::Splitting,
    },
    #[error("expected a form of degree {expected}, got {got}")]
    WrongDegree { expected: u8, got: u8 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

// ---------------------------------------------------------------------------
// Damping profile
// ---------------------------------------------------------------------------

/// C² radial cutoff: identically 1 on `|x| <= r0`, identically 0 on
/// `|x| >= r1`, a quintic smoothstep in between. First and second
/// derivatives vanish at both ends.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DampingProfile {
    pub r0: f64,
    pub r1: f64,
}

impl DampingProfile {
    pub fn new(r0: f64, r1: f64) -> Result<DampingProfile, MoserError> {
        if !(0.0 < r0 && r0 < r1 && r1 <= 1.0) {
            return Err(MoserError::BadParameter(format!(
                "damping radii must satisfy 0 < r0 < r1 <= 1, got ({r0}, {r1})"
            )));
        }
        Ok(DampingProfile { r0, r1 })
    }

    pub fn value(&self, rho: f64) -> f64 {
        if rho <= self.r0 {
            1.0
        } else if rho >= self.r1 {
            0.0
        } else {
            let u = (rho - self.r0) / (self.r1 - self.r0);
            1.0 - u * u * u * (6.0 * u * u - 15.0 * u + 10.0)
        }
    }

    pub fn deriv(&self, rho: f64) -> f64 {
        if rho <= self.r0 || rho >= self.r1 {
            0.0
        } else {
            let w = self.r1 - self.r0;
            let u = (rho - self.r0) / w;
            -30.0 * u * u * (u - 1.0) * (u - 1.0) / w
        }
    }

    pub fn second_deriv(&self, rho: f64) -> f64 {
        if rho <= self.r0 || rho >= self.r1 {
            0.0
        } else {
            let w = self.r1 - self.r0;
            let u = (rho - self.r0) / w;
            -60.0 * u * (2.0 * u - 1.0) * (u - 1.0) / (w * w)
        }
    }
}

// ---------------------------------------------------------------------------
// Gauss–Legendre quadrature (16 point, adaptive bisection)
// ---------------------------------------------------------------------------

const GL16_NODES: [f64; 8] = [
    0.09501250983763744,
    0.2816035507792589,
    0.45801677765722737,
    0.6178762444026438,
    0.755404408355003,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let dx = half * GL16_NODES[i];
        acc += GL16_WEIGHTS[i] * (f(mid + dx) + f(mid - dx));
    }
    acc * half
}

const QUAD_TARGET: f64 = 1e-13;
const QUAD_MAX_DEPTH: u32 = 12;

fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, depth: u32) -> f64 {
    let whole = gl16(f, a, b);
    let mid = 0.5 * (a + b);
    let split = gl16(f, a, mid) + gl16(f, mid, b);
    if (whole - split).abs() <= QUAD_TARGET * (1.0 + split.abs()) || depth >= QUAD_MAX_DEPTH {
        split
    } else {
        adaptive_gl(f, a, mid, depth + 1) + adaptive_gl(f, mid, b, depth + 1)
    }
}

/// `∫_0^1 s^pow · g(θ, s·x) ds`, the radial integral behind the cone
/// operator, by adaptive Gauss–Legendre.
fn radial_integral(g: &RingElement, pow: i32, theta: f64, x: [f64; 3]) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    let f = |s: f64| s.powi(pow) * g.eval_at(theta, [s * x[0], s * x[1], s * x[2]]);
    adaptive_gl(&f, 0.0, 1.0, 0)
}

// ---------------------------------------------------------------------------
// Cone primitive
// ---------------------------------------------------------------------------

/// Exact first-order data of a 1-form along the core circle: the
/// values and first x-derivatives of its components at `x = 0`. This is
/// everything the Taylor correction needs, and it stays exact even when
/// the 1-form itself is only evaluable by quadrature.
#[derive(Debug, Clone)]
pub struct CoreJet {
    /// `η_θ(θ, 0)`.
    pub theta: RingElement,
    /// `η_i(θ, 0)`.
    pub comps: [RingElement; 3],
    /// `∂η_i/∂x_j (θ, 0)`, indexed `[i][j]`.
    pub jac: [[RingElement; 3]; 3],
    /// `∂η_θ/∂x_i (θ, 0)`.
    pub theta_jac: [RingElement; 3],
}

impl CoreJet {
    pub fn of_one_form(eta: &DiffForm) -> CoreJet {
        let comp = |mask: u8| eta.component(mask);
        let xs = [Var::X1, Var::X2, Var::X3];
        let masks = [MASK_X1, MASK_X2, MASK_X3];
        let theta = comp(MASK_THETA).restrict_core();
        let comps = [
            comp(MASK_X1).restrict_core(),
            comp(MASK_X2).restrict_core(),
            comp(MASK_X3).restrict_core(),
        ];
        let mut jac: [[RingElement; 3]; 3] = Default::default();
        let mut theta_jac: [RingElement; 3] = Default::default();
        for i in 0..3 {
            theta_jac[i] = comp(MASK_THETA).partial(xs[i]).restrict_core();
            for j in 0..3 {
                jac[i][j] = comp(masks[i]).partial(xs[j]).restrict_core();
            }
        }
        CoreJet {
            theta,
            comps,
            jac,
            theta_jac,
        }
    }

    /// The two symmetry defects that vanish exactly when `dη̃ = 0` on
    /// the core: `∂η_i/∂x_j - ∂η_j/∂x_i` and `∂η_θ/∂x_i - ∂(η_i)/∂θ`.
    pub fn symmetry_defects(&self) -> ([[RingElement; 3]; 3], [RingElement; 3]) {
        let mut skew: [[RingElement; 3]; 3] = Default::default();
        for i in 0..3 {
            for j in 0..3 {
                skew[i][j] = &self.jac[i][j] - &self.jac[j][i];
            }
        }
        let mut mixed: [RingElement; 3] = Default::default();
        for i in 0..3 {
            mixed[i] = &self.theta_jac[i] - &self.comps[i].partial(Var::Theta);
        }
        (skew, mixed)
    }

    pub fn is_first_order_symmetric(&self) -> bool {
        let (skew, mixed) = self.symmetry_defects();
        skew.iter().flatten().all(|e| e.is_zero()) && mixed.iter().all(|e| e.is_zero())
    }

    fn scale(&self, c: &Rational) -> CoreJet {
        CoreJet {
            theta: self.theta.scale(c),
            comps: self.comps.clone().map(|e| e.scale(c)),
            jac: self.jac.clone().map(|row| row.map(|e| e.scale(c))),
            theta_jac: self.theta_jac.clone().map(|e| e.scale(c)),
        }
    }
}

/// A primitive produced by the cone homotopy operator: exact when all
/// coefficients were polynomial-in-x, quadrature-backed otherwise.
#[derive(Debug, Clone)]
pub enum Primitive {
    Exact(DiffForm),
    Quadrature(ConePrimitive),
}

/// Quadrature-backed cone primitive of a closed 2-form whose
/// coefficients involve `e^(k·x3)`.
#[derive(Debug, Clone)]
pub struct ConePrimitive {
    /// Spatial components `b_ij` for the pairs (1,2), (1,3), (2,3),
    /// stored with their exact partial derivatives.
    spatial: [(usize, usize, RingElement); 3],
    /// `b_θi` components.
    theta_comps: [RingElement; 3],
}

impl ConePrimitive {
    fn new(beta: &DiffForm) -> ConePrimitive {
        let pair = |i: usize, j: usize| beta.component((1u8 << i) | (1u8 << j));
        ConePrimitive {
            spatial: [
                (1, 2, pair(1, 2)),
                (1, 3, pair(1, 3)),
                (2, 3, pair(2, 3)),
            ],
            theta_comps: [
                pair(0, 1),
                pair(0, 2),
                pair(0, 3),
            ],
        }
    }

    pub fn covector_at(&self, theta: f64, x: [f64; 3]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, j, b) in &self.spatial {
            let g = radial_integral(b, 1, theta, x);
            // G_ij · (x_i dx_j - x_j dx_i); indices here are 1-based
            // over the spatial slots of the covector.
            out[*j] += g * x[*i - 1];
            out[*i] -= g * x[*j - 1];
        }
        let mut acc = 0.0;
        for (i, b) in self.theta_comps.iter().enumerate() {
            if !b.is_zero() {
                acc += x[i] * radial_integral(b, 0, theta, x);
            }
        }
        out[0] = -acc;
        out
    }

    /// Evaluate the exterior derivative of the primitive by
    /// differentiating under the radial integrals; used to verify
    /// `d(Kβ) = β` pointwise.
    pub fn exterior_derivative_matrix_at(&self, theta: f64, x: [f64; 3]) -> Matrix4<f64> {
        let xs = [Var::X1, Var::X2, Var::X3];
        // Gradients of the 1-form components.
        let mut grad = [[0.0f64; 4]; 4]; // grad[a][comp]: ∂_a η_comp
        for (i, j, b) in &self.spatial {
            let g = radial_integral(b, 1, theta, x);
            let g_theta = radial_integral(&b.partial(Var::Theta), 1, theta, x);
            let mut g_x = [0.0; 3];
            for (m, &v) in xs.iter().enumerate() {
                g_x[m] = radial_integral(&b.partial(v), 2, theta, x);
            }
            grad[0][*j] += g_theta * x[*i - 1];
            grad[0][*i] -= g_theta * x[*j - 1];
            for m in 0..3 {
                grad[m + 1][*j] += g_x[m] * x[*i - 1];
                grad[m + 1][*i] -= g_x[m] * x[*j - 1];
            }
            grad[*i][*j] += g;
            grad[*j][*i] -= g;
        }
        for (i, b) in self.theta_comps.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            let a_val = radial_integral(b, 0, theta, x);
            let a_theta = radial_integral(&b.partial(Var::Theta), 0, theta, x);
            grad[0][0] -= x[i] * a_theta;
            for (m, &v) in xs.iter().enumerate() {
                let a_m = radial_integral(&b.partial(v), 1, theta, x);
                grad[m + 1][0] -= x[i] * a_m;
                if m == i {
                    grad[m + 1][0] -= a_val;
                }
            }
        }
        Matrix4::from_fn(|a, b| grad[a][b] - grad[b][a])
    }

    fn core_jet(&self) -> CoreJet {
        let half = crate::ring::rat(1, 2);
        let mut jac: [[RingElement; 3]; 3] = Default::default();
        for (i, j, b) in &self.spatial {
            let core = b.restrict_core().scale(&half);
            // ∂η_j/∂x_i = +b_ij/2, ∂η_i/∂x_j = -b_ij/2 at the core.
            jac[*j - 1][*i - 1] = &jac[*j - 1][*i - 1] + &core;
            jac[*i - 1][*j - 1] = &jac[*i - 1][*j - 1] - &core;
        }
        let mut theta_jac: [RingElement; 3] = Default::default();
        for (i, b) in self.theta_comps.iter().enumerate() {
            theta_jac[i] = -b.restrict_core();
        }
        CoreJet {
            theta: RingElement::zero(),
            comps: Default::default(),
            jac,
            theta_jac,
        }
    }
}

impl Primitive {
    pub fn covector_at(&self, theta: f64, x: [f64; 3]) -> [f64; 4] {
        match self {
            Primitive::Exact(form) => form.covector_at(theta, x),
            Primitive::Quadrature(cone) => cone.covector_at(theta, x),
        }
    }

    pub fn core_jet(&self) -> CoreJet {
        match self {
            Primitive::Exact(form) => CoreJet::of_one_form(form),
            Primitive::Quadrature(cone) => cone.core_jet(),
        }
    }

    /// Exact loop integral `∫_C i*η̃`, as a rational multiple of 2π.
    /// Cone primitives vanish on the core circle, so theirs is zero by
    /// construction.
    pub fn loop_integral(&self) -> Rational {
        match self {
            Primitive::Exact(form) => loop_integral(form),
            Primitive::Quadrature(_) => Rational::zero(),
        }
    }
}

/// Primitive of a closed 2-form by the cone (radial) homotopy operator
/// on the `D^3` factor, with `θ` as a parameter. Every closed 2-form on
/// the chart is exact (it restricts to zero on the core circle), so
/// this always produces a genuine primitive: `d(Kβ) = β`.
///
/// When every coefficient is polynomial in `x` the radial integrals are
/// rational and the primitive is returned exactly; coefficients with
/// `e^(k·x3)` factors fall back to adaptive Gauss–Legendre evaluation.
pub fn cone_primitive(beta: &DiffForm) -> Result<Primitive, MoserError> {
    if beta.degree() != 2 {
        return Err(MoserError::WrongDegree {
            expected: 2,
            got: beta.degree(),
        });
    }
    if !beta.ext_d().is_zero() {
        return Err(MoserError::NotClosed);
    }
    let polynomial = beta.components().all(|(_, e)| e.is_polynomial());
    if !polynomial {
        return Ok(Primitive::Quadrature(ConePrimitive::new(beta)));
    }
    let coords = [RingElement::x1(), RingElement::x2(), RingElement::x3()];
    let mut comps: [RingElement; 4] = Default::default();
    for (i, j) in [(1usize, 2usize), (1, 3), (2, 3)] {
        let b = beta.component((1u8 << i) | (1u8 << j));
        if b.is_zero() {
            continue;
        }
        let g = b.radial_weight(2);
        comps[j] = &comps[j] + &(&g * &coords[i - 1]);
        comps[i] = &comps[i] - &(&g * &coords[j - 1]);
    }
    for i in 0..3 {
        let b = beta.component(MASK_THETA | (1u8 << (i + 1)));
        if b.is_zero() {
            continue;
        }
        comps[0] = &comps[0] - &(&b.radial_weight(1) * &coords[i]);
    }
    Ok(Primitive::Exact(DiffForm::one_form(comps)))
}

/// Exact loop integral of a symbolic 1-form over the core circle,
/// as a rational multiple of 2π.
pub fn loop_integral(eta: &DiffForm) -> Rational {
    eta.component(MASK_THETA).theta_integral_core()
}

/// The quadratic Taylor model
/// `f = f0(θ) + Σ η̃_i(θ,0) x_i + ½ Σ ∂η̃_i/∂x_j(θ,0) x_i x_j`,
/// where `f0` is the periodic θ-antiderivative of `η̃_θ(θ,0)`. Requires
/// a vanishing loop integral, otherwise `f0` would not be periodic.
pub fn taylor_correction_from_jet(jet: &CoreJet) -> Result<RingElement, MoserError> {
    let mean = jet.theta.theta_integral_core();
    if !mean.is_zero() {
        return Err(MoserError::NonzeroLoopIntegral {
            value: mean.to_string(),
        });
    }
    let f0 = if jet.theta.is_zero() {
        RingElement::zero()
    } else {
        jet.theta.theta_antiderivative()?
    };
    let coords = [RingElement::x1(), RingElement::x2(), RingElement::x3()];
    let mut f = f0;
    for i in 0..3 {
        f = f + &jet.comps[i] * &coords[i];
    }
    let half = crate::ring::rat(1, 2);
    for i in 0..3 {
        for j in 0..3 {
            let quad = (&jet.jac[i][j] * &coords[i]) * &coords[j];
            f = f + quad.scale(&half);
        }
    }
    Ok(f)
}

/// Convenience wrapper for symbolic 1-forms.
pub fn taylor_correction(eta: &DiffForm) -> Result<RingElement, MoserError> {
    if eta.degree() != 1 {
        return Err(MoserError::WrongDegree {
            expected: 1,
            got: eta.degree(),
        });
    }
    taylor_correction_from_jet(&CoreJet::of_one_form(eta))
}

// ---------------------------------------------------------------------------
// The corrected 1-form η = η̃ - d(χ·f)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum EtaTilde {
    Primitive(Primitive),
    /// `ε·χ_gen·g` for a perturbation family `ω1 = ω0 + ε·d(χ_gen·g)`,
    /// whose primitive is known in closed form.
    DampedGenerator {
        epsilon: f64,
        generator: DiffForm,
        damp: DampingProfile,
    },
}

impl EtaTilde {
    fn covector_at(&self, theta: f64, x: [f64; 3]) -> [f64; 4] {
        match self {
            EtaTilde::Primitive(p) => p.covector_at(theta, x),
            EtaTilde::DampedGenerator {
                epsilon,
                generator,
                damp,
            } => {
                let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let chi = damp.value(rho);
                let mut cov = generator.covector_at(theta, x);
                for c in &mut cov {
                    *c *= epsilon * chi;
                }
                cov
            }
        }
    }

    fn core_jet(&self) -> CoreJet {
        match self {
            EtaTilde::Primitive(p) => p.core_jet(),
            EtaTilde::DampedGenerator {
                epsilon, generator, ..
            } => {
                // χ ≡ 1 near the core, so the jet is ε times the
                // generator's. The f64 ε is a dyadic rational, kept
                // exact.
                let eps = BigRational::from_float(*epsilon).expect("finite epsilon");
                CoreJet::of_one_form(generator).scale(&eps)
            }
        }
    }
}

/// Numeric evaluator for the corrected 1-form `η = η̃ - d(χ·f)`.
/// Inside the inner damping radius this is exactly `η̃ - df`; outside
/// the outer radius it is `η̃` again.
#[derive(Debug, Clone)]
pub struct CorrectedEta {
    eta_tilde: EtaTilde,
    pub correction: RingElement,
    d_correction: DiffForm,
    damp: DampingProfile,
}

impl CorrectedEta {
    pub fn covector_at(&self, theta: f64, x: [f64; 3]) -> [f64; 4] {
        let mut out = self.eta_tilde.covector_at(theta, x);
        let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let chi = self.damp.value(rho);
        if chi != 0.0 {
            let df = self.d_correction.covector_at(theta, x);
            for (o, d) in out.iter_mut().zip(df.iter()) {
                *o -= chi * d;
            }
        }
        let chi_d = self.damp.deriv(rho);
        if chi_d != 0.0 && rho > 0.0 {
            let fval = self.correction.eval_at(theta, x);
            for i in 0..3 {
                out[i + 1] -= chi_d * (x[i] / rho) * fval;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Families of forms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum FamilyVariant {
    /// ω1 given symbolically; β = ω1 - ω0 checked closed exactly.
    Symbolic { beta: DiffForm },
    /// ω1 = ω0 + ε·d(χ·g), evaluated numerically.
    Perturbed {
        epsilon: f64,
        generator: DiffForm,
        d_generator: DiffForm,
        damp: DampingProfile,
    },
}

/// A linear family `ω_t = (1-t)·ω0 + t·ω1`.
#[derive(Debug, Clone)]
pub struct FormFamily {
    omega0: DiffForm,
    variant: FamilyVariant,
}

impl FormFamily {
    /// Family between two symbolic closed 2-forms. The difference must
    /// be exactly closed, which the cone operator then integrates.
    pub fn linear(omega0: DiffForm, omega1: DiffForm) -> Result<FormFamily, MoserError> {
        if omega0.degree() != 2 || omega1.degree() != 2 {
            return Err(MoserError::WrongDegree {
                expected: 2,
                got: omega0.degree().max(omega1.degree()),
            });
        }
        let beta = &omega1 - &omega0;
        if !beta.ext_d().is_zero() {
            return Err(MoserError::NotClosed);
        }
        Ok(FormFamily {
            omega0,
            variant: FamilyVariant::Symbolic { beta },
        })
    }

    /// Family `ω_t = ω0 + t·ε·d(χ·g)` for a compactly supported exact
    /// perturbation; `g` must be a symbolic 1-form.
    pub fn perturbation(
        omega0: DiffForm,
        epsilon: f64,
        generator: DiffForm,
        damp: DampingProfile,
    ) -> Result<FormFamily, MoserError> {
        if omega0.degree() != 2 {
            return Err(MoserError::WrongDegree {
                expected: 2,
                got: omega0.degree(),
            });
        }
        if generator.degree() != 1 {
            return Err(MoserError::WrongDegree {
                expected: 1,
                got: generator.degree(),
            });
        }
        let d_generator = generator.ext_d();
        Ok(FormFamily {
            omega0,
            variant: FamilyVariant::Perturbed {
                epsilon,
                generator,
                d_generator,
                damp,
            },
        })
    }

    pub fn omega0(&self) -> &DiffForm {
        &self.omega0
    }

    /// Matrix of `β = dω_t/dt` (constant in `t` for a linear family).
    pub fn beta_matrix_at(&self, theta: f64, x: [f64; 3]) -> Matrix4<f64> {
        match &self.variant {
            FamilyVariant::Symbolic { beta } => matrix_of(beta, theta, x),
            FamilyVariant::Perturbed {
                epsilon,
                generator,
                d_generator,
                damp,
            } => {
                let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let chi = damp.value(rho);
                let chi_d = damp.deriv(rho);
                let mut m = matrix_of(d_generator, theta, x) * chi;
                if chi_d != 0.0 && rho > 0.0 {
                    // dχ ∧ g with dχ = χ'(ρ)·(Σ x_i dx_i)/ρ.
                    let g = generator.covector_at(theta, x);
                    let mut grad = [0.0; 4];
                    for i in 0..3 {
                        grad[i + 1] = chi_d * x[i] / rho;
                    }
                    for a in 0..4 {
                        for b in 0..4 {
                            m[(a, b)] += grad[a] * g[b] - grad[b] * g[a];
                        }
                    }
                }
                m * *epsilon
            }
        }
    }

    /// Matrix of `ω_t` at a point.
    pub fn matrix_at(&self, t: f64, theta: f64, x: [f64; 3]) -> Matrix4<f64> {
        matrix_of(&self.omega0, theta, x) + self.beta_matrix_at(theta, x) * t
    }
}

fn matrix_of(form: &DiffForm, theta: f64, x: [f64; 3]) -> Matrix4<f64> {
    let raw = form.two_form_matrix_at(theta, x);
    Matrix4::from_fn(|i, j| raw[i][j])
}

// ---------------------------------------------------------------------------
// Pipeline preparation and the pointwise transport solve
// ---------------------------------------------------------------------------

/// A prepared Moser pipeline: the family, its corrected primitive, and
/// the exact bookkeeping produced along the way.
#[derive(Debug, Clone)]
pub struct MoserRun {
    pub family: FormFamily,
    pub eta: CorrectedEta,
    /// Loop integral of η̃ along the core (a rational multiple of 2π).
    pub loop_integral: Rational,
}

/// Build the corrected 1-form for a family: primitive, loop-integral
/// check, Taylor correction, damping.
pub fn prepare(family: FormFamily, correction_damp: DampingProfile) -> Result<MoserRun, MoserError> {
    let eta_tilde = match &family.variant {
        FamilyVariant::Symbolic { beta } => EtaTilde::Primitive(cone_primitive(beta)?),
        FamilyVariant::Perturbed {
            epsilon,
            generator,
            damp,
            ..
        } => EtaTilde::DampedGenerator {
            epsilon: *epsilon,
            generator: generator.clone(),
            damp: *damp,
        },
    };
    let loop_int = match &eta_tilde {
        EtaTilde::Primitive(p) => p.loop_integral(),
        // ε·χ·g vanishes… its θ-component on the core is ε·g_θ(θ,0);
        // integrate it exactly.
        EtaTilde::DampedGenerator {
            epsilon, generator, ..
        } => {
            let eps = BigRational::from_float(*epsilon).expect("finite epsilon");
            loop_integral(generator) * eps
        }
    };
    if !loop_int.is_zero() {
        return Err(MoserError::NonzeroLoopIntegral {
            value: loop_int.to_string(),
        });
    }
    let jet = eta_tilde.core_jet();
    let correction = taylor_correction_from_jet(&jet)?;
    let d_correction = DiffForm::one_form([
        correction.partial(Var::Theta),
        correction.partial(Var::X1),
        correction.partial(Var::X2),
        correction.partial(Var::X3),
    ]);
    Ok(MoserRun {
        family,
        eta: CorrectedEta {
            eta_tilde,
            correction,
            d_correction,
            damp: correction_damp,
        },
        loop_integral: loop_int,
    })
}

const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Solve the row-vector equation `X·A = η` for `X`, i.e. `i_X ω = η`
/// with `A[i][j] = ω(e_i, e_j)`.
pub fn solve_transport(a: &Matrix4<f64>, eta: &[f64; 4]) -> Option<[f64; 4]> {
    let rhs = Vector4::new(eta[0], eta[1], eta[2], eta[3]);
    let lu = a.transpose().lu();
    let x = lu.solve(&rhs)?;
    let residual = (a.transpose() * x - rhs).norm();
    if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOL * (1.0 + rhs.norm()) {
        return None;
    }
    Some([x[0], x[1], x[2], x[3]])
}

impl MoserRun {
    /// The Moser velocity field: `X_t` with `i_(X_t) ω_t = -η`, so that
    /// the flow satisfies `d/dt (φ_t^* ω_t) = 0`.
    pub fn velocity(&self, t: f64, theta: f64, x: [f64; 3]) -> Result<[f64; 4], MoserError> {
        let a = self.family.matrix_at(t, theta, x);
        let mut eta = self.eta.covector_at(theta, x);
        for e in &mut eta {
            *e = -*e;
        }
        solve_transport(&a, &eta).ok_or_else(|| {
            let x_norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let hint = if x_norm < 0.05 {
                "the point is effectively on the zero circle".to_string()
            } else {
                "the family degenerates off the core; shrink the neighborhood".to_string()
            };
            MoserError::SingularMatrix {
                t,
                theta,
                x_norm,
                hint,
            }
        })
    }

    /// Flow one point from `t = 0` to `t = 1` with classical RK4.
    pub fn flow_point(&self, start: [f64; 4], steps: usize) -> Result<[f64; 4], MoserError> {
        Ok(self.flow_with_displacement(start, steps)?.0)
    }

    /// Flow map together with the accumulated displacement
    /// `φ1(p) - p`. Differencing displacements instead of endpoints
    /// removes the `|p|·ulp/δ` cancellation floor from the
    /// finite-difference Jacobians.
    pub fn flow_with_displacement(
        &self,
        start: [f64; 4],
        steps: usize,
    ) -> Result<([f64; 4], [f64; 4]), MoserError> {
        if steps == 0 {
            return Err(MoserError::BadParameter("steps must be positive".into()));
        }
        let h = 1.0 / steps as f64;
        let mut s = start;
        let mut disp = [0.0f64; 4];
        let f = |t: f64, s: &[f64; 4]| self.velocity(t, s[0], [s[1], s[2], s[3]]);
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = f(t, &s)?;
            let s2 = add(&s, &k1, h / 2.0);
            let k2 = f(t + h / 2.0, &s2)?;
            let s3 = add(&s, &k2, h / 2.0);
            let k3 = f(t + h / 2.0, &s3)?;
            let s4 = add(&s, &k3, h);
            let k4 = f(t + h, &s4)?;
            for i in 0..4 {
                let inc = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                s[i] += inc;
                disp[i] += inc;
            }
        }
        Ok((s, disp))
    }
}

fn add(s: &[f64; 4], k: &[f64; 4], c: f64) -> [f64; 4] {
    [
        s[0] + c * k[0],
        s[1] + c * k[1],
        s[2] + c * k[2],
        s[3] + c * k[3],
    ]
}

// ---------------------------------------------------------------------------
// Flow integration with pullback verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FdOptions {
    /// Central-difference step for the flow-map Jacobian.
    pub delta: f64,
    /// One Richardson extrapolation level on the Jacobian.
    pub richardson: bool,
}

impl Default for FdOptions {
    fn default() -> FdOptions {
        FdOptions {
            delta: 1e-5,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub particles: usize,
    pub flow_integrations: usize,
}

/// Result of one Moser-flow run over a particle set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowResult {
    /// (start, end) chart coordinates per particle.
    pub particles: Vec<([f64; 4], [f64; 4])>,
    /// `max_(a,b) |(φ1^* ω1 - ω0)(e_a, e_b)|` per particle.
    pub pullback_errors: Vec<f64>,
    pub max_pullback_error: f64,
    /// Least-squares slope of `log‖X‖` against `log|x|` near the core,
    /// when measured (see [`velocity_decay_fit`]).
    pub decay_fit: Option<f64>,
    pub step_stats: StepStats,
}

/// Integrate the Moser flow for a set of particles and measure the
/// pullback defect `φ1^* ω1 - ω0` at each start point, with the flow
/// Jacobian approximated by central differences.
pub fn integrate_flow(
    run: &MoserRun,
    particles: &[ChartPoint],
    steps: usize,
    fd: &FdOptions,
) -> Result<FlowResult, MoserError> {
    let mut pairs = Vec::with_capacity(particles.len());
    let mut errors = Vec::with_capacity(particles.len());
    let mut max_err = 0.0f64;
    let mut integrations = 0usize;
    for p in particles {
        let x = p.x();
        let s0 = [p.theta(), x[0], x[1], x[2]];
        let end = run.flow_point(s0, steps)?;
        integrations += 1;
        let jac = flow_jacobian(run, &s0, steps, fd, &mut integrations)?;
        let a1 = run.family.matrix_at(1.0, end[0], [end[1], end[2], end[3]]);
        let a0 = run.family.matrix_at(0.0, s0[0], [s0[1], s0[2], s0[3]]);
        let pulled = jac.transpose() * a1 * jac;
        let defect = pulled - a0;
        let err = defect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        errors.push(err);
        max_err = max_err.max(err);
        pairs.push((s0, end));
    }
    Ok(FlowResult {
        particles: pairs,
        pullback_errors: errors,
        max_pullback_error: max_err,
        decay_fit: None,
        step_stats: StepStats {
            steps,
            particles: particles.len(),
            flow_integrations: integrations,
        },
    })
}

fn flow_jacobian(
    run: &MoserRun,
    s0: &[f64; 4],
    steps: usize,
    fd: &FdOptions,
    integrations: &mut usize,
) -> Result<Matrix4<f64>, MoserError> {
    let jac_at = |delta: f64, integrations: &mut usize| -> Result<Matrix4<f64>, MoserError> {
        let mut m = Matrix4::identity();
        for col in 0..4 {
            let mut plus = *s0;
            plus[col] += delta;
            let mut minus = *s0;
            minus[col] -= delta;
            let (_, dp) = run.flow_with_displacement(plus, steps)?;
            let (_, dm) = run.flow_with_displacement(minus, steps)?;
            *integrations += 2;
            for row in 0..4 {
                m[(row, col)] += (dp[row] - dm[row]) / (2.0 * delta);
            }
        }
        Ok(m)
    };
    let coarse = jac_at(fd.delta, integrations)?;
    if !fd.richardson {
        return Ok(coarse);
    }
    let fine = jac_at(fd.delta / 2.0, integrations)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

// ---------------------------------------------------------------------------
// Decay diagnostics
// ---------------------------------------------------------------------------

/// Least-squares fit of `log y` against `log r`.
fn log_log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, y)| *r > 0.0 && *y > 1e-300)
        .map(|(r, y)| (r.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|(a, _)| a).sum::<f64>() / n;
    let my = pts.iter().map(|(_, b)| b).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (a, b) in &pts {
        cov += (a - mx) * (b - my);
        var += (a - mx) * (a - mx);
    }
    if var == 0.0 {
        None
    } else {
        Some(cov / var)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub max_ratio: f64,
    pub samples: usize,
}

/// Deterministic low-discrepancy directions on the sphere.
fn sample_directions(count: usize) -> Vec<[f64; 3]> {
    let golden = 2.399963229728653;
    (0..count)
        .map(|k| {
            let z = -1.0 + 2.0 * (k as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Fit the radial decay of the Moser velocity near the core:
/// `‖X_t‖ ~ |x|^slope` over shells `rmin <= |x| <= rmax`, maximizing
/// over `t ∈ {0, ½, 1}`. The reported ratio is `max ‖X‖/|x|`, the
/// empirical constant in the linear-decay bound.
pub fn velocity_decay_fit(
    run: &MoserRun,
    rmin: f64,
    rmax: f64,
    shells: usize,
    directions: usize,
) -> Result<DecayFit, MoserError> {
    let shells = shells.max(2);
    let dirs = sample_directions(directions);
    let mut samples = Vec::new();
    let mut max_ratio = 0.0f64;
    for si in 0..shells {
        let r = rmin * (rmax / rmin).powf(si as f64 / (shells - 1) as f64);
        let mut worst = 0.0f64;
        for (k, d) in dirs.iter().enumerate() {
            let theta = TAU * (k as f64) / dirs.len() as f64;
            let x = [r * d[0], r * d[1], r * d[2]];
            for t in [0.0, 0.5, 1.0] {
                let v = run.velocity(t, theta, x)?;
                let norm = (v.iter().map(|a| a * a).sum::<f64>()).sqrt();
                worst = worst.max(norm);
            }
        }
        max_ratio = max_ratio.max(worst / r);
        samples.push((r, worst));
    }
    let slope = log_log_slope(&samples).unwrap_or(f64::NAN);
    Ok(DecayFit {
        slope,
        max_ratio,
        samples: samples.len(),
    })
}

/// Fit the vanishing order of the corrected `η` at the core:
/// `‖η(θ, x)‖ ~ |x|^slope` on shells `|x| <= rmax`.
pub fn eta_order_fit(run: &MoserRun, rmax: f64, shells: usize, directions: usize) -> DecayFit {
    let shells = shells.max(2);
    let dirs = sample_directions(directions);
    let rmin = rmax / 16.0;
    let mut samples = Vec::new();
    let mut max_ratio = 0.0f64;
    for si in 0..shells {
        let r = rmin * (rmax / rmin).powf(si as f64 / (shells - 1) as f64);
        let mut worst = 0.0f64;
        for (k, d) in dirs.iter().enumerate() {
            let theta = TAU * (k as f64) / dirs.len() as f64;
            let x = [r * d[0], r * d[1], r * d[2]];
            let v = run.eta.covector_at(theta, x);
            let norm = (v.iter().map(|a| a * a).sum::<f64>()).sqrt();
            worst = worst.max(norm);
        }
        max_ratio = max_ratio.max(worst / (r * r));
        samples.push((r, worst));
    }
    let slope = log_log_slope(&samples).unwrap_or(f64::NAN);
    DecayFit {
        slope,
        max_ratio,
        samples: samples.len(),
    }
}

// ---------------------------------------------------------------------------
// Grafting experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraftReport {
    /// Largest scanned radius on which the whole family stayed
    /// nondegenerate off the core.
    pub radius: f64,
    pub source_class: SplittingClass,
    pub target_class: SplittingClass,
    pub flow: FlowResult,
}

/// Interpolate a form with matching splitting class to a target model
/// form and run the Moser flow between them, reporting the radius on
/// which the family stayed nondegenerate and the final pullback errors.
pub fn graft_experiment(
    w: &DiffForm,
    target: &DiffForm,
    particles: &[ChartPoint],
    steps: usize,
    damp: DampingProfile,
) -> Result<GraftReport, MoserError> {
    let lin_w = extract_linearization(w)?;
    let lin_t = extract_linearization(target)?;
    let class_w = classify_splitting(&lin_w.path)?;
    let class_t = classify_splitting(&lin_t.path)?;
    if class_w.value != class_t.value {
        return Err(MoserError::ClassMismatch {
            found: class_w.value,
            target: class_t.value,
        });
    }
    let family = FormFamily::linear(w.clone(), target.clone())?;
    // Nondegeneracy scan: Pfaffian of ω_t over shells, from the outside
    // in. The Pfaffian equals the volume density λ_t².
    let dirs = sample_directions(24);
    let mut radius = None;
    let mut shell = 1.0f64;
    while shell > 0.05 {
        let mut min_pf = f64::INFINITY;
        for (k, d) in dirs.iter().enumerate() {
            let theta = TAU * k as f64 / dirs.len() as f64;
            let x = [shell * d[0], shell * d[1], shell * d[2]];
            for ti in 0..=8 {
                let t = ti as f64 / 8.0;
                let a = family.matrix_at(t, theta, x);
                let pf = a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)]
                    + a[(0, 3)] * a[(1, 2)];
                min_pf = min_pf.min(pf);
            }
        }
        if min_pf > 1e-8 {
            radius = Some(shell);
            break;
        }
        shell *= 0.8;
    }
    let radius = radius.ok_or_else(|| {
        MoserError::DegenerateFamily(
            "no shell radius found on which ω_t stays nondegenerate for all t".into(),
        )
    })?;
    let run = prepare(family, damp)?;
    let inside: Vec<ChartPoint> = particles
        .iter()
        .filter(|p| p.x_norm() <= 0.85 * radius)
        .copied()
        .collect();
    let flow = integrate_flow(&run, &inside, steps, &FdOptions::default())?;
    Ok(GraftReport {
        radius,
        source_class: class_w,
        target_class: class_t,
        flow,
    })
}

// ---------------------------------------------------------------------------
// Deterministic particle sampling (splitmix64)
// ---------------------------------------------------------------------------

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn next_unit(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

/// Seeded particles uniform in the annulus `rmin <= |x| <= rmax`, with
/// uniform θ. Fully determined by the seed.
pub fn sample_annulus(seed: u64, count: usize, rmin: f64, rmax: f64) -> Vec<ChartPoint> {
    let mut state = seed ^ 0xD1B54A32D192ED03;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = [
            rmax * (2.0 * next_unit(&mut state) - 1.0),
            rmax * (2.0 * next_unit(&mut state) - 1.0),
            rmax * (2.0 * next_unit(&mut state) - 1.0),
        ];
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r < rmin || r > rmax {
            continue;
        }
        let theta = TAU * next_unit(&mut state);
        out.push(ChartPoint::new(theta, x).expect("inside the ball"));
    }
    out
}

// ---------------------------------------------------------------------------
// Run descriptors (the CLI-facing JSON schema)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationDescriptor {
    pub epsilon: f64,
    pub generator: DiffForm,
    pub damping: DampingRadii,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DampingRadii {
    pub r0: f64,
    pub r1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    /// Base model name ("A", "B", "B-glued") for ω0, unless given
    /// explicitly.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub omega0: Option<DiffForm>,
    #[serde(default)]
    pub omega1: Option<DiffForm>,
    #[serde(default)]
    pub perturbation: Option<PerturbationDescriptor>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParticleSpec {
    pub seed: u64,
    pub count: usize,
    pub rmin: f64,
    pub rmax: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub family: FamilyDescriptor,
    pub particles: ParticleSpec,
    pub steps: usize,
    #[serde(default)]
    pub richardson: bool,
}

impl RunDescriptor {
    /// The default verification experiment: a compactly supported exact
    /// perturbation of the oriented model.
    pub fn default_experiment() -> RunDescriptor {
        let generator = DiffForm::one_form([
            RingElement::zero(),
            RingElement::x2(),
            RingElement::zero(),
            RingElement::zero(),
        ]);
        RunDescriptor {
            family: FamilyDescriptor {
                model: Some("A".into()),
                omega0: None,
                omega1: None,
                perturbation: Some(PerturbationDescriptor {
                    epsilon: 0.01,
                    generator,
                    damping: DampingRadii { r0: 0.5, r1: 0.9 },
                }),
            },
            particles: ParticleSpec {
                seed: 1,
                count: 200,
                rmin: 0.2,
                rmax: 0.8,
            },
            steps: 64,
            richardson: false,
        }
    }

    pub fn build(&self) -> Result<(MoserRun, Vec<ChartPoint>), MoserError> {
        let omega0 = match (&self.family.omega0, self.family.model.as_deref()) {
            (Some(w), _) => w.clone(),
            (None, Some("A")) | (None, None) => crate::models::oriented_form(),
            (None, Some("B")) => crate::models::unoriented_form(&crate::ring::rat(1, 2)),
            (None, Some("B-glued")) => crate::models::oriented_form(),
            (None, Some(other)) => {
                return Err(MoserError::BadParameter(format!("unknown model `{other}`")))
            }
        };
        let (family, damp) = match (&self.family.omega1, &self.family.perturbation) {
            (Some(w1), None) => (
                FormFamily::linear(omega0, w1.clone())?,
                DampingProfile::new(0.5, 0.9)?,
            ),
            (None, Some(p)) => {
                let damp = DampingProfile::new(p.damping.r0, p.damping.r1)?;
                (
                    FormFamily::perturbation(omega0, p.epsilon, p.generator.clone(), damp)?,
                    damp,
                )
            }
            _ => {
                return Err(MoserError::BadParameter(
                    "family needs exactly one of `omega1` or `perturbation`".into(),
                ))
            }
        };
        let run = prepare(family, damp)?;
        let particles = sample_annulus(
            self.particles.seed,
            self.particles.count,
            self.particles.rmin,
            self.particles.rmax,
        );
        Ok((run, particles))
    }
}

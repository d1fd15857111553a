//! Contact forms on the boundary `S^1 × S^2`, their Reeb fields and
//! closed-orbit structure.
//!
//! The contact form is
//! `λ = -½(x1² + x2² - 2x3²) dθ + x2x3 dx1 - x1x3 dx2`,
//! with `dλ` equal to the oriented chart 2-form; the unoriented model
//! glues the same chart data with the deck map. The Reeb field is
//! always computed by a pointwise kernel solve in an orthonormal
//! tangent frame and normalized by `λ(X) = 1`; no closed-form
//! expression is hardcoded (see [`field_normalization_report`] for why
//! the obvious one needs care).

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3, Vector4};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acs::{omega_matrix, OmegaMatrix};
use crate::forms::{AffineChartMap, DiffForm, FormError};
use crate::ring::{rat, ChartPoint, Rational, RingElement, RingError};

#[derive(Debug, Error)]
pub enum ReebError {
    #[error("point is not on the unit sphere: |x| = {norm}")]
    OffSphere { norm: f64 },
    #[error("restricted 2-form is rank deficient at the requested point ({detail})")]
    RankDeficiency { detail: String },
    #[error("step size underflow during orbit integration")]
    StepUnderflow,
    #[error("conserved quantities drifted by {drift:e}, above the abort threshold {threshold:e}; the integrator is misconfigured")]
    DriftExceeded { drift: f64, threshold: f64 },
    #[error("Reeb rotation rates depend on θ (deviation {deviation:e}); expected θ-independence")]
    ThetaDependentRates { deviation: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactKind {
    A,
    BGlued,
}

/// A contact model on the boundary sphere: the chart contact form, its
/// exterior derivative, and the deck map when the model is glued.
#[derive(Debug, Clone)]
pub struct ContactModel {
    pub kind: ContactKind,
    pub lambda: DiffForm,
    pub omega: DiffForm,
    matrix: OmegaMatrix,
    pub deck: Option<AffineChartMap>,
}

/// The chart contact 1-form
/// `-½(x1² + x2² - 2x3²)dθ + x2x3 dx1 - x1x3 dx2`.
pub fn contact_one_form() -> DiffForm {
    let x1 = RingElement::x1();
    let x2 = RingElement::x2();
    let x3 = RingElement::x3();
    let half = rat(1, 2);
    let theta_coeff = -(&(&x1 * &x1) + &(&x2 * &x2)).scale(&half)
        + (&x3 * &x3);
    DiffForm::one_form([
        theta_coeff,
        &x2 * &x3,
        -&(&x1 * &x3),
        RingElement::zero(),
    ])
}

impl ContactModel {
    pub fn new(kind: ContactKind) -> ContactModel {
        let lambda = contact_one_form();
        let omega = lambda.ext_d();
        let matrix = omega_matrix(&omega).expect("dλ is a 2-form");
        let deck = match kind {
            ContactKind::A => None,
            ContactKind::BGlued => {
                let deck = AffineChartMap::deck();
                let pulled = lambda.pullback(&deck).expect("deck map is supported");
                assert!(
                    (&pulled - &lambda).is_zero(),
                    "deck map must preserve the contact form exactly"
                );
                Some(deck)
            }
        };
        ContactModel {
            kind,
            lambda,
            omega,
            matrix,
            deck,
        }
    }

    pub fn omega_matrix(&self) -> &OmegaMatrix {
        &self.matrix
    }
}

/// Exact coefficient of the volume form in `Σ x_i dx_i ∧ λ ∧ dλ`.
/// Positive away from `x = 0`, which is what makes the restriction of
/// `λ` to the unit sphere a contact form.
pub fn contact_volume(model: &ContactModel) -> RingElement {
    let radial = DiffForm::one_form([
        RingElement::zero(),
        RingElement::x1(),
        RingElement::x2(),
        RingElement::x3(),
    ]);
    let three = model.lambda.wedge(&model.omega).expect("degree 3");
    let four = radial.wedge(&three).expect("degree 4");
    four.component(crate::forms::MASK_VOL)
}

/// A sum-of-positive-monomials certificate in `u = x1² + x2²` and
/// `v = x3²`: coefficients `c > 0` with `p = Σ c · u^a · v^b` exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertTerm {
    pub u_pow: u32,
    pub v_pow: u32,
    #[serde(with = "crate::ring::rational_serde")]
    pub coeff: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub terms: Vec<CertTerm>,
}

/// Try to certify positivity (away from `x = 0`) of a polynomial by
/// rewriting it exactly in `u = x1² + x2²`, `v = x3²` with positive
/// coefficients. Returns `None` when the rewrite fails or a
/// coefficient is nonpositive.
pub fn positivity_certificate(p: &RingElement) -> Option<PositivityCertificate> {
    use crate::ring::Trig;
    // Candidate coefficients are read off the x2-free monomials:
    // u^a v^b contributes x1^(2a) x3^(2b) with coefficient c_(a,b).
    let mut terms: Vec<CertTerm> = Vec::new();
    for t in p.terms() {
        if t.trig != Trig::One || t.exp_rate != 0 {
            return None;
        }
        if t.powers[1] != 0 {
            continue;
        }
        if t.powers[0] % 2 != 0 || t.powers[2] % 2 != 0 {
            return None;
        }
        terms.push(CertTerm {
            u_pow: t.powers[0] / 2,
            v_pow: t.powers[2] / 2,
            coeff: t.coeff.clone(),
        });
    }
    // Exact reconstruction check.
    let u = &(&RingElement::x1() * &RingElement::x1())
        + &(&RingElement::x2() * &RingElement::x2());
    let v = &RingElement::x3() * &RingElement::x3();
    let mut rebuilt = RingElement::zero();
    for term in &terms {
        let mut m = RingElement::constant(term.coeff.clone());
        for _ in 0..term.u_pow {
            m = &m * &u;
        }
        for _ in 0..term.v_pow {
            m = &m * &v;
        }
        rebuilt = rebuilt + m;
    }
    if !(&rebuilt - p).is_zero() {
        return None;
    }
    if terms.is_empty() || terms.iter().any(|t| t.coeff <= Rational::zero()) {
        return None;
    }
    Some(PositivityCertificate { terms })
}

const SPHERE_EPS: f64 = 1e-12;
const RANK_EPS: f64 = 1e-12;

/// Orthonormal basis `(t1, t2)` of the tangent plane of `S^2` at a
/// unit vector `x`, chosen deterministically.
fn tangent_frame(x: [f64; 3]) -> (Vector3<f64>, Vector3<f64>) {
    let xv = Vector3::from_column_slice(&x);
    let mut axis = 0;
    for i in 1..3 {
        if x[i].abs() < x[axis].abs() {
            axis = i;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let t1 = e.cross(&xv).normalize();
    let t2 = xv.cross(&t1);
    (t1, t2)
}

fn reeb_raw(model: &ContactModel, theta: f64, x_raw: [f64; 3]) -> Result<[f64; 4], ReebError> {
    let norm = x_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ReebError::RankDeficiency {
            detail: "x = 0".into(),
        });
    }
    let x = [x_raw[0] / norm, x_raw[1] / norm, x_raw[2] / norm];
    let a = model.matrix.eval_at(theta, x);
    let (t1, t2) = tangent_frame(x);
    let frame = [
        Vector4::new(1.0, 0.0, 0.0, 0.0),
        Vector4::new(0.0, t1[0], t1[1], t1[2]),
        Vector4::new(0.0, t2[0], t2[1], t2[2]),
    ];
    // Restriction of dλ to the tangent frame and its kernel direction.
    let om01 = frame[0].dot(&(a * frame[1]));
    let om02 = frame[0].dot(&(a * frame[2]));
    let om12 = frame[1].dot(&(a * frame[2]));
    let k = [om12, -om02, om01];
    let k_norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let scale = a.norm().max(1e-300);
    if k_norm < RANK_EPS * scale {
        return Err(ReebError::RankDeficiency {
            detail: format!("kernel direction has norm {k_norm:e}"),
        });
    }
    let v4 = frame[0] * k[0] + frame[1] * k[1] + frame[2] * k[2];
    let cov = model.lambda.covector_at(theta, x);
    let ell = cov[0] * v4[0] + cov[1] * v4[1] + cov[2] * v4[2] + cov[3] * v4[3];
    if ell.abs() < RANK_EPS * k_norm.max(1e-300) {
        return Err(ReebError::RankDeficiency {
            detail: format!("λ vanishes on the kernel direction ({ell:e})"),
        });
    }
    Ok([v4[0] / ell, v4[1] / ell, v4[2] / ell, v4[3] / ell])
}

/// The Reeb vector field at a point of `S^1 × S^2`: the unique tangent
/// vector with `λ(X) = 1` and `dλ(X, ·) = 0` on the tangent space,
/// found by a 3x3 kernel solve in an orthonormal tangent frame.
pub fn reeb_field_at(model: &ContactModel, p: &ChartPoint) -> Result<[f64; 4], ReebError> {
    let norm = p.x_norm();
    if (norm - 1.0).abs() > SPHERE_EPS {
        return Err(ReebError::OffSphere { norm });
    }
    reeb_raw(model, p.theta(), p.x())
}

/// Closure verdict of one integrated orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClosureVerdict {
    Closed(f64),
    QuasiPeriodic,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    Single,
    Doubled,
}

/// One Reeb trajectory summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub start: ChartPoint,
    /// `x3` at the start.
    pub r: f64,
    /// Max deviation of `x3` over the run.
    pub drift_x3: f64,
    /// Max deviation of `x1² + x2²` over the run.
    pub drift_plane: f64,
    pub period: Option<f64>,
    pub closed: ClosureVerdict,
    pub multiplicity: Multiplicity,
    /// Number of 2π passes in θ at closure (deck applications for the
    /// glued model).
    pub passes: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitParams {
    pub t_max: f64,
    pub step: f64,
    pub closure_tol: f64,
    pub drift_abort: f64,
    /// Stop declaring Undetermined once this many section crossings
    /// have been examined.
    pub max_passes: usize,
    /// Record a trajectory sample every this many steps (0 = none).
    pub record_every: usize,
}

impl Default for OrbitParams {
    fn default() -> OrbitParams {
        OrbitParams {
            t_max: 100.0,
            step: 1e-3,
            closure_tol: 1e-6,
            drift_abort: 1e-6,
            max_passes: 12,
            record_every: 0,
        }
    }
}

/// Threshold on |dθ/dt| deciding between the θ-section and the
/// full-state return detectors.
const THETA_RATE_EPS: f64 = 1e-9;

struct Rk4State {
    t: f64,
    s: [f64; 4],
}

fn rk4_step(
    model: &ContactModel,
    state: &Rk4State,
    h: f64,
) -> Result<Rk4State, ReebError> {
    let f = |s: &[f64; 4]| reeb_raw(model, s[0], [s[1], s[2], s[3]]);
    let add = |s: &[f64; 4], k: &[f64; 4], c: f64| {
        [s[0] + c * k[0], s[1] + c * k[1], s[2] + c * k[2], s[3] + c * k[3]]
    };
    let k1 = f(&state.s)?;
    let k2 = f(&add(&state.s, &k1, h / 2.0))?;
    let k3 = f(&add(&state.s, &k2, h / 2.0))?;
    let k4 = f(&add(&state.s, &k3, h))?;
    let mut s = state.s;
    for i in 0..4 {
        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(Rk4State {
        t: state.t + h,
        s,
    })
}

fn renormalize(s: &mut [f64; 4]) {
    let n = (s[1] * s[1] + s[2] * s[2] + s[3] * s[3]).sqrt();
    if n > 0.0 {
        s[1] /= n;
        s[2] /= n;
        s[3] /= n;
    }
}

/// Integrate one Reeb orbit with classical RK4 and per-step projection
/// of `x` back to the unit sphere. Closure is detected with a Poincaré
/// return test — the section `θ = θ0` when the orbit moves in `θ`,
/// full-state proximity otherwise — and, for the glued model, tested
/// modulo the deck action with the pass parity deciding Single vs
/// Doubled.
pub fn integrate_orbit(
    model: &ContactModel,
    start: &ChartPoint,
    params: &OrbitParams,
) -> Result<(OrbitRecord, Vec<[f64; 5]>), ReebError> {
    if params.step <= 0.0 || !params.step.is_finite() {
        return Err(ReebError::StepUnderflow);
    }
    let norm = start.x_norm();
    if (norm - 1.0).abs() > SPHERE_EPS {
        return Err(ReebError::OffSphere { norm });
    }
    let x0 = start.x();
    let s0 = [start.theta(), x0[0], x0[1], x0[2]];
    let r0 = x0[2];
    let q0 = x0[0] * x0[0] + x0[1] * x0[1];
    let v0 = reeb_raw(model, s0[0], x0)?;
    let theta_rate = v0[0];
    let theta_mode = theta_rate.abs() > THETA_RATE_EPS;
    let deck = model.deck.as_ref();

    let mut state = Rk4State { t: 0.0, s: s0 };
    let mut drift_x3 = 0.0f64;
    let mut drift_plane = 0.0f64;
    let mut samples = Vec::new();
    if params.record_every > 0 {
        samples.push([0.0, s0[0], s0[1], s0[2], s0[3]]);
    }

    // Section data.
    let dir = theta_rate.signum();
    let mut next_pass = 1usize;
    let mut verdict = ClosureVerdict::Undetermined;
    let mut passes_at_closure = 0usize;
    let mut crossings_seen = 0usize;

    // Full-state section: hyperplane through s0 orthogonal to the
    // initial velocity, restricted to nearby states.
    let vel_norm = (v0.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let section_normal = [v0[0] / vel_norm, v0[1] / vel_norm, v0[2] / vel_norm, v0[3] / vel_norm];
    let section_value = |s: &[f64; 4]| {
        section_normal[0] * (s[0] - s0[0])
            + section_normal[1] * (s[1] - s0[1])
            + section_normal[2] * (s[2] - s0[2])
            + section_normal[3] * (s[3] - s0[3])
    };
    let state_distance = |s: &[f64; 4]| {
        ((s[0] - s0[0]).powi(2)
            + (s[1] - s0[1]).powi(2)
            + (s[2] - s0[2]).powi(2)
            + (s[3] - s0[3]).powi(2))
        .sqrt()
    };
    const CAPTURE_RADIUS: f64 = 0.3;
    let mut prev_section = 0.0f64;

    let mut step_index = 0usize;
    while state.t < params.t_max && matches!(verdict, ClosureVerdict::Undetermined) {
        let h = params.step.min(params.t_max - state.t);
        if h < params.step * 1e-12 {
            break;
        }
        let prev = Rk4State { t: state.t, s: state.s };
        let mut next = rk4_step(model, &prev, h)?;
        renormalize(&mut next.s);
        step_index += 1;

        let x3 = next.s[3];
        let q = next.s[1] * next.s[1] + next.s[2] * next.s[2];
        drift_x3 = drift_x3.max((x3 - r0).abs());
        drift_plane = drift_plane.max((q - q0).abs());
        if drift_x3.max(drift_plane) > params.drift_abort {
            return Err(ReebError::DriftExceeded {
                drift: drift_x3.max(drift_plane),
                threshold: params.drift_abort,
            });
        }

        if params.record_every > 0 && step_index % params.record_every == 0 {
            samples.push([next.t, next.s[0], next.s[1], next.s[2], next.s[3]]);
        }

        if theta_mode {
            // Crossings of θ = θ0 + dir·2π·n.
            let target = s0[0] + dir * TAU * next_pass as f64;
            let crossed = if dir > 0.0 {
                next.s[0] >= target
            } else {
                next.s[0] <= target
            };
            if crossed {
                let crossing = refine_theta_crossing(model, &prev, h, target)?;
                crossings_seen += 1;
                let n = next_pass;
                let mut x_rep = [crossing.s[1], crossing.s[2], crossing.s[3]];
                if let Some(map) = deck {
                    if n % 2 == 1 {
                        x_rep = map.apply_linear(x_rep);
                    }
                }
                let dist = ((x_rep[0] - x0[0]).powi(2)
                    + (x_rep[1] - x0[1]).powi(2)
                    + (x_rep[2] - x0[2]).powi(2))
                .sqrt();
                if dist < params.closure_tol {
                    verdict = ClosureVerdict::Closed(crossing.t);
                    passes_at_closure = n;
                } else if crossings_seen >= params.max_passes {
                    verdict = ClosureVerdict::QuasiPeriodic;
                }
                next_pass += 1;
            }
        } else {
            // Fixed-θ orbits: transverse-section return near the start.
            let sv = section_value(&next.s);
            if step_index > 1
                && prev_section < 0.0
                && sv >= 0.0
                && state_distance(&next.s) < CAPTURE_RADIUS
            {
                let crossing = refine_section_crossing(model, &prev, h, &section_value)?;
                crossings_seen += 1;
                let dist = state_distance(&crossing.s);
                if dist < params.closure_tol {
                    verdict = ClosureVerdict::Closed(crossing.t);
                    passes_at_closure = 0;
                } else if crossings_seen >= params.max_passes {
                    verdict = ClosureVerdict::QuasiPeriodic;
                }
            }
            prev_section = sv;
        }
        state = next;
    }

    if matches!(verdict, ClosureVerdict::Undetermined) && crossings_seen >= 3 {
        verdict = ClosureVerdict::QuasiPeriodic;
    }

    let multiplicity = match (model.deck.as_ref(), verdict) {
        (Some(_), ClosureVerdict::Closed(_)) if passes_at_closure % 2 == 0 && passes_at_closure > 0 => {
            Multiplicity::Doubled
        }
        _ => Multiplicity::Single,
    };
    let record = OrbitRecord {
        start: *start,
        r: r0,
        drift_x3,
        drift_plane,
        period: match verdict {
            ClosureVerdict::Closed(t) => Some(t),
            _ => None,
        },
        closed: verdict,
        multiplicity,
        passes: passes_at_closure,
    };
    Ok((record, samples))
}

/// Bisection refinement of the θ-section crossing inside one step.
fn refine_theta_crossing(
    model: &ContactModel,
    before: &Rk4State,
    h: f64,
    target: f64,
) -> Result<Rk4State, ReebError> {
    let mut lo = 0.0f64;
    let mut hi = h;
    let start_sign = (before.s[0] - target).signum();
    let mut best = rk4_step(model, before, hi)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let probe = rk4_step(model, before, mid)?;
        if (probe.s[0] - target).signum() == start_sign {
            lo = mid;
        } else {
            hi = mid;
            best = probe;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let mut refined = best;
    renormalize(&mut refined.s);
    Ok(refined)
}

fn refine_section_crossing(
    model: &ContactModel,
    before: &Rk4State,
    h: f64,
    section: &dyn Fn(&[f64; 4]) -> f64,
) -> Result<Rk4State, ReebError> {
    let mut lo = 0.0f64;
    let mut hi = h;
    let mut best = rk4_step(model, before, hi)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let probe = rk4_step(model, before, mid)?;
        if section(&probe.s) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = probe;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let mut refined = best;
    renormalize(&mut refined.s);
    Ok(refined)
}

/// Angular rates of an orbit circle `x3 = r`: `r1` is the rotation rate
/// of `(x1, x2)` and `r2` the θ rate. Both depend only on `r`, which is
/// verified by sampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RotationNumbers {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    /// True at the poles, where the plane circle degenerates.
    pub degenerate_plane: bool,
}

pub fn rotation_numbers(model: &ContactModel, r: f64) -> Result<RotationNumbers, ReebError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(ReebError::BadParameter(format!("|r| must be <= 1, got {r}")));
    }
    let plane = (1.0 - r * r).sqrt();
    if plane < 1e-8 {
        let x = [0.0, 0.0, r.signum()];
        let v = reeb_raw(model, 0.0, x)?;
        return Ok(RotationNumbers {
            r,
            r1: 0.0,
            r2: v[0],
            degenerate_plane: true,
        });
    }
    let mut rates = Vec::new();
    for theta in [0.0, 1.0, 2.5, 4.2] {
        let x = [plane, 0.0, r];
        let v = reeb_raw(model, theta, x)?;
        // Angular rate of (x1, x2) at the sample (x2 = 0).
        let r1 = v[2] / plane;
        rates.push((r1, v[0]));
    }
    let (r1, r2) = rates[0];
    let deviation = rates
        .iter()
        .map(|(a, b)| (a - r1).abs().max((b - r2).abs()))
        .fold(0.0f64, f64::max);
    if deviation > 1e-10 {
        return Err(ReebError::ThetaDependentRates { deviation });
    }
    Ok(RotationNumbers {
        r,
        r1,
        r2,
        degenerate_plane: false,
    })
}

/// Best rational approximation `p/q` of `x` with `q <= max_denom`,
/// by continued fractions.
pub fn rational_approximation(x: f64, max_denom: i64) -> (i64, i64, f64) {
    let mut p_prev = 1i64;
    let mut q_prev = 0i64;
    let mut p = x.floor() as i64;
    let mut q = 1i64;
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if frac.abs() < 1e-15 {
            break;
        }
        let a = (1.0 / frac).floor();
        if !a.is_finite() {
            break;
        }
        let next_frac = 1.0 / frac - a;
        let a = a as i64;
        let p_next = a
            .saturating_mul(p)
            .saturating_add(p_prev);
        let q_next = a
            .saturating_mul(q)
            .saturating_add(q_prev);
        if q_next > max_denom || q_next <= 0 {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        frac = next_frac;
    }
    (p, q, x - p as f64 / q as f64)
}

/// Closed-orbit predicate from rotation rates: a θ-line (`r1 = 0`), a
/// fixed-θ circle (`r2 = 0`), or a rational ratio `r2/r1 = p/q` with
/// `q` capped at 1000. Returns the minimal period when closed.
pub fn closed_orbit_from_rates(rn: &RotationNumbers, tol: f64) -> Option<f64> {
    const RATE_EPS: f64 = 1e-9;
    const MAX_DENOM: i64 = 1000;
    if rn.degenerate_plane || rn.r1.abs() < RATE_EPS {
        if rn.r2.abs() < RATE_EPS {
            return None;
        }
        return Some(TAU / rn.r2.abs());
    }
    if rn.r2.abs() < RATE_EPS {
        return Some(TAU / rn.r1.abs());
    }
    let ratio = rn.r2 / rn.r1;
    let (_, q, err) = rational_approximation(ratio, MAX_DENOM);
    if err.abs() <= tol && q > 0 {
        Some(TAU * q as f64 / rn.r1.abs())
    } else {
        None
    }
}

/// One row of the closed-orbit census.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusEntry {
    pub r: f64,
    pub start: [f64; 3],
    pub verdict: ClosureVerdict,
    pub multiplicity: Multiplicity,
    pub period: Option<f64>,
}

/// Sweep orbit circles `x3 = r` and report the closed-orbit loci.
///
/// For the oriented model the sweep is rate-based over `r` in `[-1, 1]`
/// and every closed orbit is Single. For the glued model, orbits are
/// integrated in the quotient over `r` in `[0, 1]`; the equator `r = 0`
/// gets two representatives because the deck-fixed points `(±1, 0, 0)`
/// close after one pass while every other equatorial orbit needs two.
pub fn orbit_census(
    model: &ContactModel,
    grid: usize,
    tol: f64,
) -> Result<Vec<CensusEntry>, ReebError> {
    let grid = grid.max(2);
    let mut entries = Vec::new();
    match model.kind {
        ContactKind::A => {
            for i in 0..grid {
                let r = -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
                let rn = rotation_numbers(model, r)?;
                let period = closed_orbit_from_rates(&rn, tol);
                let plane = (1.0 - r * r).max(0.0).sqrt();
                entries.push(CensusEntry {
                    r,
                    start: [plane, 0.0, r],
                    verdict: match period {
                        Some(t) => ClosureVerdict::Closed(t),
                        None => ClosureVerdict::QuasiPeriodic,
                    },
                    multiplicity: Multiplicity::Single,
                    period,
                });
            }
        }
        ContactKind::BGlued => {
            for i in 0..grid {
                let r = i as f64 / (grid - 1) as f64;
                let plane = (1.0 - r * r).max(0.0).sqrt();
                let mut starts: Vec<[f64; 3]> = Vec::new();
                if r < 1e-12 {
                    starts.push([1.0, 0.0, 0.0]);
                    starts.push([-1.0, 0.0, 0.0]);
                    starts.push([0.5f64.sqrt(), 0.5f64.sqrt(), 0.0]);
                } else if plane < 1e-12 {
                    starts.push([0.0, 0.0, 1.0]);
                } else {
                    starts.push([plane, 0.0, r]);
                }
                for x in starts {
                    let rn = rotation_numbers(model, r)?;
                    let pass_time = if rn.r2.abs() > 1e-6 {
                        TAU / rn.r2.abs()
                    } else {
                        f64::INFINITY
                    };
                    let t_max = (4.5 * pass_time).min(500.0).max(50.0);
                    let params = OrbitParams {
                        t_max,
                        max_passes: 4,
                        ..OrbitParams::default()
                    };
                    let p0 = ChartPoint::sphere(0.0, x)?;
                    let (record, _) = integrate_orbit(model, &p0, &params)?;
                    entries.push(CensusEntry {
                        r,
                        start: x,
                        verdict: record.closed,
                        multiplicity: record.multiplicity,
                        period: record.period,
                    });
                }
            }
        }
    }
    Ok(entries)
}

/// The resolution of the printed closed-form normalization of the Reeb
/// field. The kernel solve fixes the denominator to be minus the
/// contact volume polynomial `-(½(x1²+x2²)(x1²+x2²+2x3²) + 2x3⁴)`;
/// placing the `2x3⁴` term inside the global `½` bracket instead gives
/// a field that is off by a factor of 2 at the poles.
#[derive(Debug, Clone, Serialize)]
pub struct FieldNormalizationReport {
    /// θ-rate of the kernel-solved field at the poles (must be 1).
    pub kernel_pole_rate: f64,
    /// θ-rate the half-bracketed denominator would give at the poles.
    pub half_bracket_pole_rate: f64,
    /// Exact check that `λ(X) = 1` holds identically with the resolved
    /// denominator, as a ring identity.
    pub resolved_identity_holds: bool,
    /// The resolved denominator polynomial.
    pub denominator: RingElement,
    pub note: String,
}

pub fn field_normalization_report(model: &ContactModel) -> Result<FieldNormalizationReport, ReebError> {
    let pole = ChartPoint::sphere(0.0, [0.0, 0.0, 1.0])?;
    let x = reeb_field_at(model, &pole)?;
    let kernel_pole_rate = x[0];

    // Candidate numerator (u, -3x2x3, 3x1x3, 0) with u = x1²+x2²-2x3².
    let x1 = RingElement::x1();
    let x2 = RingElement::x2();
    let x3 = RingElement::x3();
    let q = &(&x1 * &x1) + &(&x2 * &x2);
    let u = &q - &(&x3 * &x3).scale(&rat(2, 1));
    // λ applied to the numerator: -½u² - 3(x1²+x2²)x3².
    let lam_num = -&(&u * &u).scale(&rat(1, 2))
        - (&q * &(&x3 * &x3)).scale(&rat(3, 1));
    // Resolved denominator: -(½q(q + 2x3²) + 2x3⁴).
    let v = &x3 * &x3;
    let denominator = -&(&(&q * &(&q + &v.scale(&rat(2, 1)))).scale(&rat(1, 2))
        + &(&v * &v).scale(&rat(2, 1)));
    let resolved_identity_holds = (&lam_num - &denominator).is_zero();

    // The half-bracketed variant at the pole: -½[q(q+2x3²) + 2x3⁴]
    // evaluates to -1 there, giving rate u/f = 2 instead of 1.
    let half_bracket = -&(&(&q * &(&q + &v.scale(&rat(2, 1))))
        + &(&v * &v).scale(&rat(2, 1)))
        .scale(&rat(1, 2));
    let u_pole = u.eval(&pole);
    let half_bracket_pole_rate = u_pole / half_bracket.eval(&pole);

    Ok(FieldNormalizationReport {
        kernel_pole_rate,
        half_bracket_pole_rate,
        resolved_identity_holds,
        denominator,
        note: "Reeb normalization: λ(X)=1 forces the denominator -(½(x1²+x2²)(x1²+x2²+2x3²) + 2x3⁴); \
               a global ½ over the whole bracket is off by 2 at the poles (kernel solve gives dθ/dt = 1 there)."
            .into(),
    })
}

/// Finite-difference Jacobian of the time-T return map around a closed
/// orbit, expressed in the frame `(∂θ, t1, t2)` at the start point.
/// Raw data only; no index or nondegeneracy conclusions are drawn.
pub fn linearized_return_map(
    model: &ContactModel,
    start: &ChartPoint,
    period: f64,
    step: f64,
) -> Result<Matrix3<f64>, ReebError> {
    let (t1, t2) = tangent_frame(start.x());
    let delta = 1e-6;
    let flow_to = |s0: [f64; 4]| -> Result<[f64; 4], ReebError> {
        let mut state = Rk4State { t: 0.0, s: s0 };
        renormalize(&mut state.s);
        let steps = (period / step).ceil() as usize;
        let h = period / steps as f64;
        for _ in 0..steps {
            state = rk4_step(model, &state, h)?;
            renormalize(&mut state.s);
        }
        Ok(state.s)
    };
    let x0 = start.x();
    let base = [start.theta(), x0[0], x0[1], x0[2]];
    let dirs = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, t1[0], t1[1], t1[2]],
        [0.0, t2[0], t2[1], t2[2]],
    ];
    let mut jac = Matrix3::zeros();
    for (col, d) in dirs.iter().enumerate() {
        let plus = flow_to([
            base[0] + delta * d[0],
            base[1] + delta * d[1],
            base[2] + delta * d[2],
            base[3] + delta * d[3],
        ])?;
        let minus = flow_to([
            base[0] - delta * d[0],
            base[1] - delta * d[1],
            base[2] - delta * d[2],
            base[3] - delta * d[3],
        ])?;
        let diff = [
            (plus[0] - minus[0]) / (2.0 * delta),
            (plus[1] - minus[1]) / (2.0 * delta),
            (plus[2] - minus[2]) / (2.0 * delta),
            (plus[3] - minus[3]) / (2.0 * delta),
        ];
        let dx = Vector3::new(diff[1], diff[2], diff[3]);
        jac[(0, col)] = diff[0];
        jac[(1, col)] = t1.dot(&dx);
        jac[(2, col)] = t2.dot(&dx);
    }
    Ok(jac)
}

/// λ and dλ residuals of a field sample: `|λ(X) - 1|` and
/// `max |dλ(X, t_i)|` over the tangent frame.
pub fn reeb_defect(model: &ContactModel, p: &ChartPoint, x_field: &[f64; 4]) -> (f64, f64) {
    let cov = model.lambda.covector_at(p.theta(), p.x());
    let lam = cov
        .iter()
        .zip(x_field.iter())
        .map(|(a, b)| a * b)
        .sum::<f64>();
    let a = model.matrix.eval(p);
    let xv = Vector4::new(x_field[0], x_field[1], x_field[2], x_field[3]);
    let (t1, t2) = tangent_frame(p.x());
    let frames = [
        Vector4::new(1.0, 0.0, 0.0, 0.0),
        Vector4::new(0.0, t1[0], t1[1], t1[2]),
        Vector4::new(0.0, t2[0], t2[1], t2[2]),
    ];
    let mut max_contraction = 0.0f64;
    for t in &frames {
        max_contraction = max_contraction.max(xv.dot(&(a * t)).abs());
    }
    ((lam - 1.0).abs(), max_contraction)
}

//! Compatible almost complex structures off the zero circle.
//!
//! For a self-dual form the matrix `A` with `A[i][j] = ω(e_i, e_j)`
//! satisfies `A² = -λ²·I` where `λ² ` is the volume density of
//! `½ ω∧ω`; the rescaled operator `J = A/λ` then squares to `-I` and is
//! compatible with the conformally rescaled flat metric `g̃ = λ·g`.
//! `J` is undefined on the circle itself, where `λ` vanishes.

use nalgebra::Matrix4;
use thiserror::Error;

use crate::forms::DiffForm;
use crate::models::{volume_density, ModelError};
use crate::ring::{ChartPoint, RingElement};

#[derive(Debug, Error)]
pub enum AcsError {
    #[error("expected a 2-form, got degree {0}")]
    NotATwoForm(u8),
    #[error("volume density is negative ({0}) at the requested point; the form is not self-dual there")]
    NegativeDensity(f64),
    #[error("point is on (or too close to) the zero circle: λ = {lambda}")]
    OnCircle { lambda: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Threshold under which `λ` is treated as vanishing and `J` as
/// undefined.
pub const ON_CIRCLE_EPS: f64 = 1e-9;

const NEGATIVE_DENSITY_TOL: f64 = 1e-12;

/// The 4x4 antisymmetric matrix of a 2-form in the chart basis
/// `(θ, x1, x2, x3)`, with exact entries.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    entries: [[RingElement; 4]; 4],
}

/// Read off `A[i][j] = ω(e_i, e_j)` from the components of a 2-form.
pub fn omega_matrix(w: &DiffForm) -> Result<OmegaMatrix, AcsError> {
    if w.degree() != 2 {
        return Err(AcsError::NotATwoForm(w.degree()));
    }
    let mut entries: [[RingElement; 4]; 4] = Default::default();
    for (mask, e) in w.components() {
        let i = mask.trailing_zeros() as usize;
        let j = (7 - (mask & !(1 << i)).leading_zeros()) as usize;
        entries[i][j] = e.clone();
        entries[j][i] = -e;
    }
    Ok(OmegaMatrix { entries })
}

impl OmegaMatrix {
    pub fn entry(&self, i: usize, j: usize) -> &RingElement {
        &self.entries[i][j]
    }

    pub fn is_antisymmetric(&self) -> bool {
        for i in 0..4 {
            for j in 0..4 {
                if !(&self.entries[i][j] + &self.entries[j][i]).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Exact symbolic matrix product.
    pub fn mul(&self, other: &OmegaMatrix) -> OmegaMatrix {
        let mut entries: [[RingElement; 4]; 4] = Default::default();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = RingElement::zero();
                for k in 0..4 {
                    acc = acc + &self.entries[i][k] * &other.entries[k][j];
                }
                entries[i][j] = acc;
            }
        }
        OmegaMatrix { entries }
    }

    /// Exact test against a scalar multiple of the identity.
    pub fn equals_scalar_identity(&self, scalar: &RingElement) -> bool {
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    scalar.clone()
                } else {
                    RingElement::zero()
                };
                if !(&self.entries[i][j] - &expected).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn eval_at(&self, theta: f64, x: [f64; 3]) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j].eval_at(theta, x))
    }

    pub fn eval(&self, p: &ChartPoint) -> Matrix4<f64> {
        self.eval_at(p.theta(), p.x())
    }
}

/// The conformal factor `λ(p) ≥ 0` with `½ ω∧ω = λ²·vol`, taking the
/// positive square root everywhere.
pub fn conformal_factor(w: &DiffForm, p: &ChartPoint) -> Result<f64, AcsError> {
    let density = volume_density(w)?;
    let v = density.eval(p);
    if v < -NEGATIVE_DENSITY_TOL {
        return Err(AcsError::NegativeDensity(v));
    }
    Ok(v.max(0.0).sqrt())
}

/// A pointwise sample of the compatible almost complex structure.
#[derive(Debug, Clone)]
pub struct AcsSample {
    pub point: ChartPoint,
    pub lambda: f64,
    pub j: Matrix4<f64>,
}

/// `J = A/λ` at a point off the circle. The action convention is fixed
/// by the defining relation `g̃(u, v) = ω(Ju, v)` with `g̃ = λ·g`: `J`
/// acts on coordinate columns by left multiplication.
pub fn almost_complex_at(w: &DiffForm, p: &ChartPoint) -> Result<AcsSample, AcsError> {
    let lambda = conformal_factor(w, p)?;
    if lambda < ON_CIRCLE_EPS {
        return Err(AcsError::OnCircle { lambda });
    }
    let a = omega_matrix(w)?.eval(p);
    Ok(AcsSample {
        point: *p,
        lambda,
        j: a / lambda,
    })
}

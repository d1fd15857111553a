//! Exact exterior calculus and dynamics for self-dual 2-forms that
//! vanish on a circle, on the chart `S^1 × D^3`.
//!
//! The crate is organized around one exact coefficient ring
//! ([`ring::RingElement`]: rational trig–exponential polynomials) so
//! that the structural identities of the two local models — closedness,
//! self-duality, the symmetric traceless linearization, the contact
//! identity `dλ = ω` and the glueing invariances — are decided by exact
//! zero tests rather than floating-point comparisons. Numerics enter
//! only where dynamics do: eigenline monodromy ([`models`]), the
//! compatible almost complex structure ([`acs`]), Moser flows
//! ([`moser`]) and Reeb orbits ([`reeb`]).

pub mod acs;
pub mod forms;
pub mod models;
pub mod moser;
pub mod reeb;
pub mod ring;

pub use acs::{almost_complex_at, conformal_factor, omega_matrix, AcsSample, OmegaMatrix};
pub use forms::{AffineChartMap, DiffForm, FormError};
pub use models::{
    classify_glued, classify_splitting, extract_linearization, make_model, nondegeneracy_scan,
    volume_density, LPath, Linearization, Model, ModelError, ModelSpec, Splitting, SplittingClass,
};
pub use moser::{
    cone_primitive, graft_experiment, integrate_flow, loop_integral, prepare, taylor_correction,
    DampingProfile, FlowResult, FormFamily, MoserError, MoserRun, Primitive, RunDescriptor,
};
pub use reeb::{
    contact_volume, field_normalization_report, integrate_orbit, orbit_census,
    positivity_certificate, reeb_field_at, rotation_numbers, ClosureVerdict, ContactKind,
    ContactModel, Multiplicity, OrbitParams, OrbitRecord, ReebError,
};
pub use ring::{ChartPoint, Rational, RingElement, RingError, RingTerm, Trig, Var};

//! Simulation and analysis of a continuously measured spin-1/2 under feedback
//! computed from an estimated filter whose initial state and physical
//! parameters may be wrong.
//!
//! The coupled pair (actual state, filter state) is integrated in Bloch
//! coordinates with a shared Wiener increment. [`analysis`] provides the
//! Lyapunov candidate and its generator, the reference exponents, and
//! exponent fits; [`ensemble`] runs reproducible parallel Monte Carlo studies.

pub mod analysis;
pub mod controller;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod qstate;

pub use analysis::{
    estimate_sample_exponent, generator_v_closed, generator_v_numeric, k_bound, lyapunov_v, nu_av, nu_s,
    DerivativeMode, ExponentReport,
};
pub use controller::{
    feedback_u, validate_hypothesis_h, validate_param_condition, CustomLaw, FeedbackLaw, HypothesisReport, LawKind,
    ParamCondition,
};
pub use dynamics::{EstParams, PhysParams, VectorField3};
pub use ensemble::{
    exit_time_study, reach_time_study, run_ensemble, EnsembleOptions, EnsembleSummary, ExitStudy, ReachStudy,
};
pub use error::{Error, Result};
pub use integrator::{simulate, step, GaussianNoise, NoiseSource, Projection, Scheme, SdeConfig, Trajectory};
pub use qstate::{BlochVector, CoupledState, DensityMatrix, TargetState};

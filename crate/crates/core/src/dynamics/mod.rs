//! Closed-loop simulation, finite transition-system abstractions, simulation
//! relations and trajectory-deviation audits.
//!
//! Everything checked here runs on finite samples. A passing audit means no
//! counterexample was found among the probes; it is not a proof.

mod audit;
mod integrate;
mod model;
mod simulation;
mod transition;

pub use audit::{
    check_delta_tau_invariance, deviation_audit, measure_sup_error, sysid_deviation_audit,
    DeviationReport, InvarianceReport, SysidReport,
};
pub use integrate::{control_label, integrate_closed_loop, Trajectory};
pub use model::{
    builtin_model, builtin_models, lipschitz_sample_audit, linear_flow, ControlSystemModel,
    LipschitzSampleReport, VectorField,
};
pub use simulation::{
    check_ads, check_simulation, greatest_ads_relation, greatest_simulation, is_ads_relation,
    is_simulation, SimulationMode, SimulationOutcome, SimulationRelation,
};
pub use transition::{
    embed_tau_sampled, perturb, FiniteTransitionSystem, StateEntry, TransitionEntry,
    TransitionSystemFile,
};

use thiserror::Error;

use crate::sizing::SizingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state became non-finite at t = {time}: {state:?}")]
    NonFiniteState { time: f64, state: Vec<f64> },
    #[error("invalid integration step: {0}")]
    StepInvalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transition system schema: {0}")]
    Schema(String),
    #[error("transition system invariant: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Sizing(#[from] SizingError),
}

pub(crate) fn sup_distance_between(
    a: &FiniteTransitionSystem,
    x: usize,
    b: &FiniteTransitionSystem,
    y: usize,
) -> f64 {
    crate::geometry::sup_distance(a.coords(x), b.coords(y))
}

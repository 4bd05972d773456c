//! Interface impedance selection: minimize the time-averaged weighted
//! interaction wrench subject to a zero count of distance violations.
//!
//! Decision variables live in the unit cube and map logarithmically onto
//! `[0, upper]`. The search is a multi-start bound-constrained Nelder–Mead on
//! `λ + ρ c`; every evaluation goes through an [`EvalCache`], which can be
//! persisted to resume an interrupted run.

mod cache;
mod nelder_mead;
mod problem;
mod solve;
mod surrogate;
mod variables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::EvalCache;
pub use nelder_mead::{nelder_mead, NelderMeadOutcome, NelderMeadSettings};
pub use problem::{optimize, EpisodeObjective, NamedValue, OptimizationResult, OptimizationSettings};
pub use solve::{solve, EvaluationRecord, Objective, Phase, SolveOutcome, SolveSettings, StartOutcome};
pub use surrogate::QuadraticSurrogate;
pub use variables::{VariableBounds, VariableGroup, VariableMap};

use crate::simulation::SimulationError;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("invalid optimization problem: {0}")]
    Invalid(String),
    #[error("evaluation cache: {0}")]
    Cache(String),
    #[error("interrupted after {new_evaluations} new evaluations")]
    Interrupted { new_evaluations: usize },
}

/// The evaluation limit of the cache was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interrupted;

/// Cost `λ` and constraint count `c` of one decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lambda: f64,
    pub constraint: u64,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.constraint == 0 && self.lambda.is_finite()
    }

    pub fn penalized(&self, rho: f64) -> f64 {
        self.lambda + rho * self.constraint as f64
    }
}

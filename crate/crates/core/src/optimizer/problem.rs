use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cache::EvalCache;
use super::solve::{solve, EvaluationRecord, Objective, SolveOutcome, SolveSettings, StartOutcome};
use super::variables::{VariableBounds, VariableMap};
use super::{Evaluation, OptimizerError};
use crate::harness::ImpedanceParams;
use crate::simulation::{
    constraint_value, cost, default_pelvis, InterfaceImpedances, MetricSettings, PreparedEpisode, SimulationTrace,
};

/// Everything that shapes the impedance search besides the episode itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationSettings {
    pub bounds: VariableBounds,
    /// Share one set of impedances between the two legs.
    pub tie_legs: bool,
    pub metrics: MetricSettings,
    pub solver: SolveSettings,
}

impl Default for OptimizationSettings {
    fn default() -> Self {
        OptimizationSettings {
            bounds: VariableBounds::default(),
            tie_legs: true,
            metrics: MetricSettings::default(),
            solver: SolveSettings::default(),
        }
    }
}

/// `u ↦ (λ, c)` for one prepared episode: decode the impedances, run the
/// episode, evaluate cost and constraint.
#[derive(Debug)]
pub struct EpisodeObjective {
    episode: PreparedEpisode,
    map: VariableMap,
    metrics: MetricSettings,
    pelvis: ImpedanceParams,
}

impl EpisodeObjective {
    pub fn new(episode: PreparedEpisode, settings: &OptimizationSettings) -> Result<Self, OptimizerError> {
        settings.metrics.validate()?;
        let mass = episode.exo().total_mass;
        let map = VariableMap::new(episode.harness(), settings.tie_legs, &settings.bounds, mass)?;
        Ok(EpisodeObjective { episode, map, metrics: settings.metrics.clone(), pelvis: default_pelvis(mass) })
    }

    pub fn episode(&self) -> &PreparedEpisode {
        &self.episode
    }

    pub fn variables(&self) -> &VariableMap {
        &self.map
    }

    pub fn metrics(&self) -> &MetricSettings {
        &self.metrics
    }

    pub fn impedances(&self, u: &[f64]) -> InterfaceImpedances {
        self.map.impedances(&self.map.to_physical(u), self.pelvis)
    }

    pub fn trace(&self, u: &[f64]) -> Result<SimulationTrace, OptimizerError> {
        Ok(self.episode.run(&self.impedances(u))?)
    }

    /// Hex digest identifying the objective; guards persisted caches.
    pub fn fingerprint(&self) -> String {
        let ep = &self.episode;
        let exo = ep.exo();
        let head = serde_json::json!({
            "anthropometrics": exo.anthropometrics,
            "layout": exo.layout,
            "harness": ep.harness(),
            "settings": ep.settings(),
            "metrics": self.metrics,
            "variables": self.map,
        });
        let mut h = Sha256::new();
        h.update(head.to_string().as_bytes());
        for v in ep.gait().times.iter().chain(ep.gait().channels.iter().flatten()) {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

impl Objective for EpisodeObjective {
    fn dimension(&self) -> usize {
        self.map.dimension()
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let clamped: Vec<f64> = u.iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
        if clamped.iter().zip(u).any(|(a, b)| a != b) {
            log::warn!("decision vector outside the unit cube was clamped");
        }
        let discard = self.metrics.transient_discard;
        match self.trace(&clamped) {
            Ok(trace) => Evaluation {
                lambda: cost(&trace, &self.metrics.weights, discard),
                constraint: constraint_value(&trace, &self.metrics.thresholds, discard),
            },
            Err(e) => {
                log::warn!("episode failed, scored as divergent: {e}");
                Evaluation { lambda: f64::INFINITY, constraint: 18 * (self.episode.steps() as u64 + 1) }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub harness: String,
    pub dimension: usize,
    pub variables: Vec<NamedValue>,
    pub unit: Vec<f64>,
    pub impedances: InterfaceImpedances,
    pub lambda: f64,
    pub constraint: u64,
    pub feasible: bool,
    /// A fresh simulation of the reported optimum agrees on `c = 0`.
    pub verified: bool,
    pub anchor_lambda: f64,
    pub anchor_constraint: u64,
    pub rho: f64,
    pub seed: u64,
    pub starts: Vec<StartOutcome>,
    pub evaluations: usize,
    pub unique_evaluations: usize,
    pub incumbent: Vec<f64>,
    #[serde(skip)]
    pub records: Vec<EvaluationRecord>,
}

impl OptimizationResult {
    fn from_outcome(objective: &EpisodeObjective, outcome: SolveOutcome, seed: u64, verified: bool) -> Self {
        let map = objective.variables();
        let x = map.to_physical(&outcome.best);
        OptimizationResult {
            harness: objective.episode().harness().code.to_string(),
            dimension: map.dimension(),
            variables: map.names().into_iter().zip(&x).map(|(name, &value)| NamedValue { name, value }).collect(),
            impedances: objective.impedances(&outcome.best),
            unit: outcome.best,
            lambda: outcome.evaluation.lambda,
            constraint: outcome.evaluation.constraint,
            feasible: outcome.feasible,
            verified,
            anchor_lambda: outcome.anchor.lambda,
            anchor_constraint: outcome.anchor.constraint,
            rho: outcome.rho,
            seed,
            starts: outcome.starts,
            evaluations: outcome.evaluations,
            unique_evaluations: outcome.unique_evaluations,
            incumbent: outcome.incumbent,
            records: outcome.records,
        }
    }
}

/// Runs the multi-start search and re-simulates the reported optimum.
pub fn optimize(
    objective: &EpisodeObjective,
    solver: &SolveSettings,
    seed: u64,
    cache: &EvalCache,
) -> Result<OptimizationResult, OptimizerError> {
    let outcome = solve(objective, solver, seed, cache)?;
    let fresh = objective.evaluate(&outcome.best);
    let verified = !outcome.feasible || fresh.constraint == 0;
    if !verified {
        log::warn!("reported optimum re-evaluated with c = {}", fresh.constraint);
    }
    Ok(OptimizationResult::from_outcome(objective, outcome, seed, verified))
}

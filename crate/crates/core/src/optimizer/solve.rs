use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cache::EvalCache;
use super::nelder_mead::{nelder_mead, NelderMeadSettings};
use super::{Evaluation, Interrupted, OptimizerError};
use crate::exec::{map_indexed, ExecutionMode};

/// A black-box objective on the unit cube.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, u: &[f64]) -> Evaluation;
    /// First start of the multi-start search.
    fn anchor(&self) -> Vec<f64> {
        vec![1.0; self.dimension()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveSettings {
    /// Number of local searches, the anchor included.
    pub starts: usize,
    /// Total objective evaluations, cache hits included.
    pub budget: usize,
    /// Random candidates screened per additional start.
    pub scatter_factor: usize,
    pub nelder_mead: NelderMeadSettings,
    pub mode: ExecutionMode,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            starts: 4,
            budget: 2000,
            scatter_factor: 4,
            nelder_mead: NelderMeadSettings::default(),
            mode: ExecutionMode::default(),
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.starts == 0 || self.budget == 0 {
            return Err(OptimizerError::Invalid("starts and budget must be positive".into()));
        }
        let nm = &self.nelder_mead;
        if !(nm.initial_step > 0.0 && nm.initial_step <= 1.0) || !(nm.ftol >= 0.0) || !(nm.xtol >= 0.0) {
            return Err(OptimizerError::Invalid("Nelder–Mead step must be in (0, 1] and tolerances non-negative".into()));
        }
        Ok(())
    }

    fn scatter_count(&self) -> usize {
        if self.starts > 1 {
            self.scatter_factor.max(1) * (self.starts - 1)
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Phase {
    Anchor,
    Scatter,
    Start(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub phase: Phase,
    pub u: Vec<f64>,
    pub lambda: f64,
    pub constraint: u64,
    pub penalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub index: usize,
    pub origin: Vec<f64>,
    /// Best point by penalized value.
    pub best: Vec<f64>,
    pub lambda: f64,
    pub constraint: u64,
    pub evaluations: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    /// Best feasible point seen, or the least violating one if none was
    /// feasible.
    pub best: Vec<f64>,
    pub evaluation: Evaluation,
    pub feasible: bool,
    pub anchor: Evaluation,
    /// Weight of the constraint count in the penalized objective.
    pub rho: f64,
    pub starts: Vec<StartOutcome>,
    pub records: Vec<EvaluationRecord>,
    /// Best feasible λ after each record (`+∞` before the first).
    pub incumbent: Vec<f64>,
    pub evaluations: usize,
    pub unique_evaluations: usize,
}

fn evaluate_batch(
    objective: &dyn Objective,
    cache: &EvalCache,
    mode: ExecutionMode,
    points: &[Vec<f64>],
) -> Result<Vec<Evaluation>, Interrupted> {
    map_indexed(mode, points.len(), |i| cache.get_or_eval(&points[i], || objective.evaluate(&points[i])))
        .into_iter()
        .collect()
}

fn record(phase: Phase, u: &[f64], e: Evaluation, rho: f64) -> EvaluationRecord {
    EvaluationRecord { phase, u: u.to_vec(), lambda: e.lambda, constraint: e.constraint, penalized: e.penalized(rho) }
}

/// Multi-start bound-constrained Nelder–Mead on the penalized objective
/// `λ + ρ c`, with `ρ = 2 λ(anchor) + 1`. Start 0 is the anchor; the others
/// are the best of a random scatter over the cube. The remaining budget is
/// split evenly over the starts, which run concurrently in parallel mode.
pub fn solve(
    objective: &dyn Objective,
    settings: &SolveSettings,
    seed: u64,
    cache: &EvalCache,
) -> Result<SolveOutcome, OptimizerError> {
    settings.validate()?;
    let n = objective.dimension();
    if cache.dimension() != n {
        return Err(OptimizerError::Invalid(format!("cache dimension {} ≠ problem dimension {n}", cache.dimension())));
    }
    let interrupted = |_| OptimizerError::Interrupted { new_evaluations: cache.new_evaluations() };
    let mode = settings.mode;

    let anchor_u: Vec<f64> = objective.anchor().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let anchor = evaluate_batch(objective, cache, mode, std::slice::from_ref(&anchor_u)).map_err(interrupted)?[0];
    let rho = if anchor.lambda.is_finite() { 2.0 * anchor.lambda + 1.0 } else { 1.0 };
    let mut records = vec![record(Phase::Anchor, &anchor_u, anchor, rho)];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scatter: Vec<Vec<f64>> = (0..settings.scatter_count()).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let scatter_values = evaluate_batch(objective, cache, mode, &scatter).map_err(interrupted)?;
    records.extend(scatter.iter().zip(&scatter_values).map(|(u, e)| record(Phase::Scatter, u, *e, rho)));

    let mut order: Vec<usize> = (0..scatter.len()).collect();
    order.sort_by(|&a, &b| scatter_values[a].penalized(rho).total_cmp(&scatter_values[b].penalized(rho)));
    let mut origins = vec![(anchor_u.clone(), anchor)];
    origins.extend(order.iter().take(settings.starts - 1).map(|&i| (scatter[i].clone(), scatter_values[i])));

    let remaining = settings.budget.saturating_sub(records.len());
    let starts = origins.len();
    let runs = map_indexed(mode, starts, |s| {
        let budget = remaining / starts + usize::from(s < remaining % starts);
        let log = Mutex::new(Vec::new());
        let eval = |points: &[Vec<f64>]| -> Result<Vec<f64>, Interrupted> {
            let values = evaluate_batch(objective, cache, mode, points)?;
            let mut log = log.lock().unwrap();
            log.extend(points.iter().zip(&values).map(|(u, e)| record(Phase::Start(s), u, *e, rho)));
            Ok(values.iter().map(|e| e.penalized(rho)).collect())
        };
        let (origin, at_origin) = &origins[s];
        let out = nelder_mead(origin, Some(at_origin.penalized(rho)), budget, &settings.nelder_mead, &eval)?;
        let best = cache.get(&out.best).unwrap_or(*at_origin);
        let outcome = StartOutcome {
            index: s,
            origin: origin.clone(),
            best: out.best,
            lambda: best.lambda,
            constraint: best.constraint,
            evaluations: out.evaluations,
            iterations: out.iterations,
            restarts: out.restarts,
            converged: out.converged,
        };
        Ok((outcome, log.into_inner().unwrap()))
    });
    let mut start_outcomes = Vec::with_capacity(starts);
    for run in runs {
        let (outcome, log) = run.map_err(interrupted)?;
        start_outcomes.push(outcome);
        records.extend(log);
    }

    let mut incumbent = Vec::with_capacity(records.len());
    let mut best_feasible: Option<usize> = None;
    let mut least_violating = 0;
    for (i, r) in records.iter().enumerate() {
        let feasible = r.constraint == 0 && r.lambda.is_finite();
        if feasible && best_feasible.is_none_or(|b| r.lambda < records[b].lambda) {
            best_feasible = Some(i);
        }
        let (c, l) = (records[least_violating].constraint, records[least_violating].lambda);
        if r.constraint < c || (r.constraint == c && r.lambda < l) {
            least_violating = i;
        }
        incumbent.push(best_feasible.map_or(f64::INFINITY, |b| records[b].lambda));
    }
    let chosen = &records[best_feasible.unwrap_or(least_violating)];
    Ok(SolveOutcome {
        best: chosen.u.clone(),
        evaluation: Evaluation { lambda: chosen.lambda, constraint: chosen.constraint },
        feasible: best_feasible.is_some(),
        anchor,
        rho,
        starts: start_outcomes,
        evaluations: records.len(),
        unique_evaluations: cache.len(),
        incumbent,
        records,
    })
}

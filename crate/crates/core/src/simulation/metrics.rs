use serde::{Deserialize, Serialize};

use super::trace::SimulationTrace;
use super::SimulationError;
use crate::model::InterfaceId;

/// Distance threshold per translational component [m].
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSettings {
    /// Fraction of the episode discarded from the start of every metric.
    pub transient_discard: f64,
    /// Maximum allowed |distance| per component, six limb interfaces × (x, y, z).
    pub thresholds: [f64; 18],
    /// Diagonal of the cost weight matrix over the six limb wrenches
    /// (36 entries, interface-major, torques first).
    pub weights: Vec<f64>,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings { transient_discard: 0.05, thresholds: [DEFAULT_THRESHOLD; 18], weights: vec![1.0; 36] }
    }
}

impl MetricSettings {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(0.0..1.0).contains(&self.transient_discard) {
            return Err(SimulationError::Invalid(format!("transient discard must be in [0, 1), got {}", self.transient_discard)));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(SimulationError::Invalid("distance thresholds must be non-negative".into()));
        }
        if self.weights.len() != 36 || self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(SimulationError::Invalid("cost weights must be 36 finite non-negative values".into()));
        }
        Ok(())
    }
}

/// Index of the first sample kept by the metrics.
fn first_retained(trace: &SimulationTrace, discard: f64) -> usize {
    let cut = trace.start + discard * (trace.horizon - trace.start);
    trace.samples.iter().position(|s| s.time >= cut - 1e-9 * trace.dt).unwrap_or(trace.samples.len())
}

fn retained_planned(trace: &SimulationTrace, discard: f64) -> usize {
    let cut = trace.start + discard * (trace.horizon - trace.start);
    let skipped = ((cut - trace.start) / trace.dt - 1e-9).ceil().max(0.0) as usize;
    trace.planned_len().saturating_sub(skipped)
}

fn require_finite(trace: &SimulationTrace) -> Result<(), SimulationError> {
    match trace.diverged_at {
        Some(t) => Err(SimulationError::Diverged(t)),
        None => Ok(()),
    }
}

/// RMS of every wrench component per interface ([`InterfaceId::ALL`] order).
pub fn wrench_rms(trace: &SimulationTrace, discard: f64) -> Result<[[f64; 6]; 7], SimulationError> {
    require_finite(trace)?;
    let kept = &trace.samples[first_retained(trace, discard)..];
    let mut out = [[0.0; 6]; 7];
    if kept.is_empty() {
        return Ok(out);
    }
    for s in kept {
        for (o, w) in out.iter_mut().zip(&s.wrenches) {
            for (a, b) in o.iter_mut().zip(w) {
                *a += b * b;
            }
        }
    }
    let n = kept.len() as f64;
    Ok(out.map(|r| r.map(|v| (v / n).sqrt())))
}

/// Linear-interpolation quantile (`q` in [0, 1]) of sorted data.
pub fn quantiles(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let x = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (x - i as f64) * (sorted[j] - sorted[i])
}

/// Summary of the exoskeleton-minus-human angle of one anatomical joint [rad].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingStats {
    pub joint: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn tracking_differences(trace: &SimulationTrace, discard: f64) -> Vec<TrackingStats> {
    let kept = &trace.samples[first_retained(trace, discard)..];
    (0..6)
        .map(|j| {
            let mut v: Vec<f64> = kept.iter().map(|s| s.tracking[j]).collect();
            v.sort_by(f64::total_cmp);
            TrackingStats {
                joint: trace.tracking_joints[j].to_string(),
                min: quantiles(&v, 0.0),
                q1: quantiles(&v, 0.25),
                median: quantiles(&v, 0.5),
                q3: quantiles(&v, 0.75),
                max: quantiles(&v, 1.0),
            }
        })
        .collect()
}

/// Number of (instant, component) pairs whose |distance| reaches its
/// threshold. A divergent trace counts every planned pair as violated.
pub fn constraint_value(trace: &SimulationTrace, thresholds: &[f64; 18], discard: f64) -> u64 {
    if trace.is_diverged() {
        return 18 * retained_planned(trace, discard) as u64;
    }
    trace.samples[first_retained(trace, discard)..]
        .iter()
        .map(|s| s.distances.iter().zip(thresholds).filter(|(d, t)| d.abs() - **t >= 0.0).count() as u64)
        .sum()
}

/// Time average of `w(t)ᵀ W w(t)` over the six limb wrenches; `+∞` for a
/// divergent trace.
pub fn cost(trace: &SimulationTrace, weights: &[f64], discard: f64) -> f64 {
    assert_eq!(weights.len(), 36, "cost weights cover six interfaces × six components");
    if trace.is_diverged() {
        return f64::INFINITY;
    }
    let kept = &trace.samples[first_retained(trace, discard)..];
    if kept.is_empty() {
        return 0.0;
    }
    let total: f64 = kept
        .iter()
        .map(|s| s.wrenches[..6].iter().flatten().zip(weights).map(|(w, k)| k * w * w).sum::<f64>())
        .sum();
    total / kept.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceRms {
    pub interface: InterfaceId,
    /// `[mx, my, mz, fx, fy, fz]` in N·m and N.
    pub rms: [f64; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub diverged_at: Option<f64>,
    pub retained_instants: usize,
    /// Empty for a divergent trace.
    pub wrench_rms: Vec<InterfaceRms>,
    pub tracking: Vec<TrackingStats>,
    pub constraint: u64,
    /// Largest |distance| component over the retained instants [m].
    pub max_distance: f64,
    /// `+∞` (serialized as `null`) for a divergent trace.
    pub cost: f64,
}

pub fn episode_metrics(trace: &SimulationTrace, settings: &MetricSettings) -> EpisodeMetrics {
    let d = settings.transient_discard;
    let first = first_retained(trace, d);
    let wrench_rms = wrench_rms(trace, d)
        .map(|rms| InterfaceId::ALL.iter().map(|&id| InterfaceRms { interface: id, rms: rms[id.index()] }).collect())
        .unwrap_or_default();
    EpisodeMetrics {
        diverged_at: trace.diverged_at,
        retained_instants: trace.len().saturating_sub(first),
        wrench_rms,
        tracking: tracking_differences(trace, d),
        constraint: constraint_value(trace, &settings.thresholds, d),
        max_distance: trace.samples[first..].iter().flat_map(|s| s.distances).fold(0.0, |m, v| m.max(v.abs())),
        cost: cost(trace, &settings.weights, d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::Sample;
    use approx::assert_relative_eq;

    fn trace_with(f: impl Fn(usize, &mut Sample), n: usize) -> SimulationTrace {
        let samples = (0..n)
            .map(|k| {
                let mut s = Sample {
                    time: k as f64 * 0.01,
                    wrenches: [[0.0; 6]; 7],
                    distances: [0.0; 18],
                    q: vec![],
                    qdot: vec![],
                    human_q: [0.0; 18],
                    tracking: [0.0; 6],
                };
                f(k, &mut s);
                s
            })
            .collect();
        SimulationTrace {
            samples,
            dof_names: vec![],
            tracking_joints: [""; 6],
            start: 0.0,
            horizon: (n - 1) as f64 * 0.01,
            dt: 0.01,
            diverged_at: None,
        }
    }

    #[test]
    fn rms_of_constant_and_sinusoid() {
        let n = 400;
        let t = trace_with(
            |k, s| {
                s.wrenches[0][3] = -2.5;
                s.wrenches[4][1] = 3.0 * (std::f64::consts::TAU * k as f64 / 100.0).sin();
            },
            n,
        );
        // Whole periods: 400 samples hold four periods of 100.
        let rms = wrench_rms(&t, 0.0).unwrap();
        assert_relative_eq!(rms[0][3], 2.5, epsilon = 1e-12);
        assert_relative_eq!(rms[4][1], 3.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(rms[1], [0.0; 6]);
    }

    #[test]
    fn cost_quadratic_form_and_rms_identity() {
        let t = trace_with(|_, s| s.wrenches[2][5] = 2.0, 50);
        assert_relative_eq!(cost(&t, &[1.0; 36], 0.0), 4.0, epsilon = 1e-12);
        assert_eq!(cost(&trace_with(|_, _| {}, 50), &[1.0; 36], 0.0), 0.0);

        let t = trace_with(
            |k, s| {
                for i in 0..7 {
                    for c in 0..6 {
                        s.wrenches[i][c] = ((k * 7 + i * 3 + c) as f64 * 0.37).sin() * (i + c + 1) as f64;
                    }
                }
            },
            300,
        );
        let rms = wrench_rms(&t, 0.05).unwrap();
        let parseval: f64 = rms[..6].iter().flatten().map(|r| r * r).sum();
        assert_relative_eq!(cost(&t, &[1.0; 36], 0.05), parseval, max_relative = 1e-12);
        // The pelvis does not enter the cost.
        let mut w = vec![1.0; 36];
        w[0] = 3.0;
        assert!(cost(&t, &w, 0.0) > cost(&t, &[1.0; 36], 0.0));
    }

    #[test]
    fn constraint_counting() {
        let t = trace_with(|k, s| s.distances[7] = if k % 10 == 3 && k < 30 { 0.2 } else { 0.05 }, 100);
        let th = [0.1; 18];
        assert_eq!(constraint_value(&t, &th, 0.0), 3);
        assert_eq!(constraint_value(&t, &[0.0; 18], 0.0), 18 * 100);
        let mut loose = th;
        loose[7] = 0.3;
        assert_eq!(constraint_value(&t, &loose, 0.0), 0);
        // The discarded transient is not counted.
        assert_eq!(constraint_value(&t, &th, 0.1), 2);
    }

    #[test]
    fn divergent_trace_handling() {
        let mut t = trace_with(|_, _| {}, 20);
        t.horizon = 0.99;
        t.diverged_at = Some(0.2);
        assert!(wrench_rms(&t, 0.0).is_err());
        assert_eq!(cost(&t, &[1.0; 36], 0.0), f64::INFINITY);
        assert_eq!(constraint_value(&t, &[0.1; 18], 0.0), 18 * 100);
    }

    #[test]
    fn tracking_quartiles() {
        let t = trace_with(|k, s| s.tracking = [0.1 + 0.0 * k as f64, k as f64, 0.0, 0.0, 0.0, -0.2], 101);
        let st = tracking_differences(&t, 0.0);
        assert_relative_eq!(st[0].median, 0.1, epsilon = 1e-15);
        assert_relative_eq!(st[1].median, 50.0);
        assert_relative_eq!(st[1].q1, 25.0);
        assert_relative_eq!(st[1].max, 100.0);
        assert_relative_eq!(st[5].min, -0.2);
    }
}

use std::sync::Arc;

use proptest::prelude::*;

use exoharness::exec::ExecutionMode;
use exoharness::harness::HarnessConfig;
use exoharness::human::{synthetic_gait, SyntheticGait};
use exoharness::model::{build_exoskeleton, Anthropometrics, ModelLayout, Percentile};
use exoharness::optimizer::*;
use exoharness::simulation::{cost, EpisodeSettings, PreparedEpisode, Sample, SimulationTrace};

fn surrogate() -> QuadraticSurrogate {
    QuadraticSurrogate::new(vec![0.31, 0.77, 0.52, 0.08, 0.64, 0.45], vec![1.0, 3.0, 0.5, 2.0, 10.0, 1.5])
}

fn solver(budget: usize, mode: ExecutionMode) -> SolveSettings {
    SolveSettings { budget, mode, ..Default::default() }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn surrogate_minimizer_recovered_from_every_start() {
    let f = surrogate();
    let cache = EvalCache::in_memory(6);
    let out = solve(&f, &solver(8000, ExecutionMode::Sequential), 11, &cache).unwrap();
    assert_eq!(out.starts.len(), 4);
    for s in &out.starts {
        assert!(max_abs_diff(&s.best, &f.center) < 1e-3, "start {}: {:?}", s.index, s.best);
    }
    assert!(out.feasible);
    assert!(max_abs_diff(&out.best, &f.center) < 1e-3);
    assert!(out.incumbent.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*out.incumbent.last().unwrap(), out.evaluation.lambda);
    assert!(out.evaluations <= 8000);
}

#[test]
fn solve_is_deterministic_across_modes() {
    let f = surrogate();
    let run = |mode| solve(&f, &solver(600, mode), 5, &EvalCache::in_memory(6)).unwrap();
    let seq = run(ExecutionMode::Sequential);
    assert_eq!(seq, run(ExecutionMode::Sequential));
    assert_eq!(seq, run(ExecutionMode::Parallel));
    assert_ne!(seq.records[1].u, solve(&f, &solver(600, ExecutionMode::Sequential), 6, &EvalCache::in_memory(6)).unwrap().records[1].u);
}

#[test]
fn scaling_the_cost_keeps_the_minimizer() {
    let base = solve(&surrogate(), &solver(3000, ExecutionMode::Sequential), 2, &EvalCache::in_memory(6)).unwrap();
    for beta in [1e-3, 7.0, 1e4] {
        let scaled = solve(&surrogate().scaled(beta), &solver(3000, ExecutionMode::Sequential), 2, &EvalCache::in_memory(6)).unwrap();
        assert!(max_abs_diff(&base.best, &scaled.best) < 1e-4, "beta {beta}");
    }
}

#[test]
fn constrained_optimum_is_feasible() {
    let floor = vec![0.5, 0.0, 0.0, 0.2, 0.0, 0.0];
    let f = surrogate().with_floor(floor.clone());
    let out = solve(&f, &solver(6000, ExecutionMode::Sequential), 3, &EvalCache::in_memory(6)).unwrap();
    assert!(out.feasible);
    assert_eq!(f.evaluate(&out.best).constraint, 0);
    assert!(out.best.iter().zip(&floor).all(|(u, l)| u >= l));
    assert!((out.best[0] - 0.5).abs() < 1e-2 && (out.best[3] - 0.2).abs() < 1e-2, "{:?}", out.best);
}

#[test]
fn interrupted_run_resumes_to_the_same_result() {
    let f = surrogate();
    let settings = solver(900, ExecutionMode::Parallel);
    let reference = solve(&f, &settings, 9, &EvalCache::in_memory(6)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("evals.bin");
    let partial = EvalCache::persistent(&path, "surrogate", 6).unwrap().with_limit(Some(150));
    match solve(&f, &settings, 9, &partial) {
        Err(OptimizerError::Interrupted { new_evaluations }) => assert_eq!(new_evaluations, 150),
        other => panic!("expected an interruption, got {other:?}"),
    }
    drop(partial);
    let resumed_cache = EvalCache::persistent(&path, "surrogate", 6).unwrap();
    assert!(resumed_cache.loaded() >= 140);
    let resumed = solve(&f, &settings, 9, &resumed_cache).unwrap();
    assert_eq!(resumed, reference);
    assert!(resumed_cache.new_evaluations() < reference.unique_evaluations);
    assert!(EvalCache::persistent(&path, "another problem", 6).is_err());
}

#[test]
fn episode_search_descends_from_the_anchor() {
    let exo = Arc::new(build_exoskeleton(&Anthropometrics::percentile(Percentile::P50), 19.0, &ModelLayout::default()).unwrap());
    let gait = synthetic_gait(&SyntheticGait::default()).unwrap();
    let ep = PreparedEpisode::new(exo, &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait, &EpisodeSettings::default()).unwrap();
    let settings = OptimizationSettings::default();
    let obj = EpisodeObjective::new(ep, &settings).unwrap();
    assert_eq!(obj.variables().dimension(), 36);
    let solver = SolveSettings { starts: 2, budget: 120, ..Default::default() };
    let cache = EvalCache::in_memory(36);
    let r = optimize(&obj, &solver, 1, &cache).unwrap();
    assert_eq!(r.anchor_constraint, 0);
    assert!(r.feasible && r.verified);
    assert!(r.lambda < r.anchor_lambda, "{} vs anchor {}", r.lambda, r.anchor_lambda);
    assert!(r.evaluations > 80 && r.evaluations <= 120, "{}", r.evaluations);
    let trace = obj.trace(&r.unit).unwrap();
    let first = trace.samples.iter().position(|s| s.time >= trace.start + 0.05 * (trace.horizon - trace.start) - 1e-12).unwrap();
    assert!(trace.samples[first..].iter().all(|s| s.distances.iter().all(|d| d.abs() < 0.1)));
    assert_eq!(obj.fingerprint(), obj.fingerprint());
    assert_eq!(r.variables.len(), 36);
}

fn trace_of(wrenches: Vec<[[f64; 6]; 7]>) -> SimulationTrace {
    let n = wrenches.len();
    SimulationTrace {
        samples: wrenches
            .into_iter()
            .enumerate()
            .map(|(k, w)| Sample {
                time: k as f64 * 0.01,
                wrenches: w,
                distances: [0.0; 18],
                q: vec![],
                qdot: vec![],
                human_q: [0.0; 18],
                tracking: [0.0; 6],
            })
            .collect(),
        dof_names: vec![],
        tracking_joints: [""; 6],
        start: 0.0,
        horizon: (n - 1) as f64 * 0.01,
        dt: 0.01,
        diverged_at: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_is_invariant_under_interface_relabelling(
        values in prop::collection::vec(-50.0..50.0f64, 10 * 42),
        weights in prop::collection::vec(0.0..5.0f64, 36),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
        beta in 1e-3..1e3f64,
    ) {
        let wrenches: Vec<[[f64; 6]; 7]> = values
            .chunks_exact(42)
            .map(|c| std::array::from_fn(|i| if i < 6 { std::array::from_fn(|j| c[6 * i + j]) } else { [0.0; 6] }))
            .collect();
        let base = cost(&trace_of(wrenches.clone()), &weights, 0.0);
        let permuted: Vec<[[f64; 6]; 7]> = wrenches
            .iter()
            .map(|w| std::array::from_fn(|i| if i < 6 { w[perm[i]] } else { [0.0; 6] }))
            .collect();
        let pw: Vec<f64> = (0..36).map(|k| weights[6 * perm[k / 6] + k % 6]).collect();
        let relabelled = cost(&trace_of(permuted), &pw, 0.0);
        prop_assert!((base - relabelled).abs() <= 1e-9 * base.max(1.0));
        let scaled: Vec<f64> = weights.iter().map(|w| beta * w).collect();
        prop_assert!((cost(&trace_of(wrenches), &scaled, 0.0) - beta * base).abs() <= 1e-9 * (beta * base).max(1.0));
    }
}

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use exoharness::exec::ExecutionMode;
use exoharness::harness::HarnessConfig;
use exoharness::human::{synthetic_gait, SyntheticGait};
use exoharness::model::InterfaceId;
use exoharness::optimizer::{optimize, EpisodeObjective, EvalCache, OptimizationResult, OptimizerError, Phase};
use exoharness::simulation::{episode_metrics, EpisodeMetrics, InterfaceImpedances, SimulationTrace, WRENCH_COMPONENTS};

use crate::config::{GaitSource, Provenance, ResultDocument, Scenario};
use crate::plot::{boxplot, grouped_bars, panels, Series};
use crate::report::{ComparisonReport, ComparisonRow};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Plain-language reading of the constraint value.
pub fn interpret_constraint(metrics: &EpisodeMetrics) -> String {
    let pairs = 18 * metrics.retained_instants;
    match metrics.diverged_at {
        Some(t) => format!(
            "the episode diverged at t = {t:.4} s: the cost is infinite and every planned (instant, component) pair counts as violated"
        ),
        None if metrics.constraint == 0 => format!(
            "c = 0: all 18 interface distance components stay below their thresholds at each of the {} retained instants (feasible)",
            metrics.retained_instants
        ),
        None => format!(
            "c = {}: number of (instant, component) pairs, out of {pairs}, where an interface distance reached its threshold (infeasible)",
            metrics.constraint
        ),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub provenance: Provenance,
    pub impedances: InterfaceImpedances,
    pub metrics: EpisodeMetrics,
    pub constraint_interpretation: String,
}

fn wrench_figure(trace: &SimulationTrace) -> String {
    let x = trace.times();
    let panel_list: Vec<(String, Vec<Series<'_>>)> = InterfaceId::ALL
        .iter()
        .map(|&id| {
            let series = WRENCH_COMPONENTS
                .iter()
                .enumerate()
                .map(|(c, name)| Series { name, values: trace.samples.iter().map(|s| s.wrenches[id.index()][c]).collect() })
                .collect();
            (id.name(), series)
        })
        .collect();
    panels("Interaction wrenches on the exoskeleton (N·m, N)", &x, "time [s]", "wrench", &panel_list, 3)
}

fn tracking_figure(title: &str, metrics: &[(String, &EpisodeMetrics)]) -> String {
    let boxes: Vec<(String, [f64; 5])> = metrics
        .iter()
        .flat_map(|(label, m)| {
            m.tracking.iter().map(move |t| {
                let name = if label.is_empty() { t.joint.clone() } else { format!("{label} {}", t.joint) };
                (name, [t.min, t.q1, t.median, t.q3, t.max])
            })
        })
        .collect();
    boxplot(title, "exoskeleton − human [rad]", &boxes)
}

/// Trace CSV, metrics JSON and figures for one episode, named `{prefix}…`.
fn write_episode_outputs(
    dir: &Path,
    prefix: &str,
    provenance: &Provenance,
    impedances: &InterfaceImpedances,
    trace: &SimulationTrace,
    metrics: &EpisodeMetrics,
) -> Result<()> {
    let mut csv = provenance.comment_line().into_bytes();
    trace.write_csv(&mut csv)?;
    write_file(&dir.join(format!("{prefix}trace.csv")), &csv)?;
    write_json(
        &dir.join(format!("{prefix}metrics.json")),
        &MetricsDocument {
            provenance: provenance.clone(),
            impedances: *impedances,
            metrics: metrics.clone(),
            constraint_interpretation: interpret_constraint(metrics),
        },
    )?;
    write_file(&dir.join(format!("{prefix}wrenches.svg")), wrench_figure(trace).as_bytes())?;
    let tracking = tracking_figure("Joint tracking differences", &[(String::new(), metrics)]);
    write_file(&dir.join(format!("{prefix}tracking.svg")), tracking.as_bytes())
}

pub fn simulate(scenario: &Scenario, out: &Path) -> Result<EpisodeMetrics> {
    create_dir(out)?;
    let provenance = Provenance::new("simulate", scenario);
    let episode = scenario.prepare()?;
    let impedances = scenario.impedances()?;
    let trace = episode.run(&impedances).context("episode failed")?;
    let metrics = episode_metrics(&trace, &scenario.config.optimization.metrics);
    write_episode_outputs(out, "", &provenance, &impedances, &trace, &metrics)?;
    Ok(metrics)
}

#[derive(Clone, Debug, Default)]
pub struct OptimizeOptions {
    /// Evaluation cache file; `None` uses `evaluations.cache` in the output
    /// directory.
    pub cache: Option<PathBuf>,
    /// Stop after this many new episode evaluations (the cache keeps them).
    pub max_new_evaluations: Option<usize>,
    pub mode: ExecutionMode,
}

fn evaluation_log(provenance: &Provenance, objective: &EpisodeObjective, result: &OptimizationResult) -> Result<Vec<u8>> {
    let mut buf = provenance.comment_line().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let map = objective.variables();
        let mut header: Vec<String> =
            ["index", "phase", "start", "lambda", "constraint", "penalized", "feasible"].map(String::from).to_vec();
        header.extend(map.names());
        w.write_record(&header)?;
        for (i, r) in result.records.iter().enumerate() {
            let (phase, start) = match r.phase {
                Phase::Anchor => ("anchor", String::new()),
                Phase::Scatter => ("scatter", String::new()),
                Phase::Start(s) => ("start", s.to_string()),
            };
            let mut row = vec![
                i.to_string(),
                phase.to_string(),
                start,
                format!("{:e}", r.lambda),
                r.constraint.to_string(),
                format!("{:e}", r.penalized),
                (r.constraint == 0 && r.lambda.is_finite()).to_string(),
            ];
            row.extend(map.to_physical(&r.u).iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn incumbent_figure(result: &OptimizationResult) -> String {
    let x: Vec<f64> = (1..=result.incumbent.len()).map(|i| i as f64).collect();
    let values: Vec<f64> = result.incumbent.iter().map(|v| if v.is_finite() && *v > 0.0 { v.log10() } else { f64::NAN }).collect();
    panels(
        "Best feasible cost",
        &x,
        "evaluation",
        "log10 λ",
        &[(format!("harness {}", result.harness), vec![Series { name: "incumbent", values }])],
        1,
    )
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub result: OptimizationResult,
    pub metrics: EpisodeMetrics,
}

pub fn optimize_scenario(scenario: &Scenario, options: &OptimizeOptions, out: &Path) -> Result<OptimizeOutcome> {
    create_dir(out)?;
    let provenance = Provenance::new("optimize", scenario);
    let objective = EpisodeObjective::new(scenario.prepare()?, &scenario.config.optimization)?;
    let dimension = objective.variables().dimension();
    let cache_path = options.cache.clone().unwrap_or_else(|| out.join("evaluations.cache"));
    let cache = EvalCache::persistent(&cache_path, &objective.fingerprint(), dimension)
        .with_context(|| format!("remove {} to start afresh", cache_path.display()))?
        .with_limit(options.max_new_evaluations);
    if cache.loaded() > 0 {
        log::info!("resuming with {} cached evaluations from {}", cache.loaded(), cache_path.display());
    }
    let mut solver = scenario.config.optimization.solver.clone();
    solver.mode = options.mode;
    let result = match optimize(&objective, &solver, scenario.seeds.optimizer, &cache) {
        Ok(r) => r,
        Err(OptimizerError::Interrupted { new_evaluations }) => bail!(
            "stopped after {new_evaluations} new evaluations; they are kept in {} and the next run resumes from them",
            cache_path.display()
        ),
        Err(e) => return Err(e.into()),
    };
    let trace = objective.trace(&result.unit)?;
    let metrics = episode_metrics(&trace, objective.metrics());
    write_json(&out.join("result.json"), &ResultDocument { provenance: provenance.clone(), result: result.clone() })?;
    write_file(&out.join("evaluations.csv"), &evaluation_log(&provenance, &objective, &result)?)?;
    write_file(&out.join("incumbent.svg"), incumbent_figure(&result).as_bytes())?;
    write_episode_outputs(out, "best_", &provenance, &result.impedances, &trace, &metrics)?;
    Ok(OptimizeOutcome { result, metrics })
}

/// Directory name for a layout code: `[3 3 2]` → `h332`.
pub fn slug(code: &str) -> String {
    let digits: String = code.chars().filter(|c| c.is_ascii_digit()).collect();
    format!("h{digits}")
}

pub fn compare(scenario: &Scenario, codes: &[String], options: &OptimizeOptions, out: &Path) -> Result<ComparisonReport> {
    if codes.len() < 2 {
        bail!("compare needs at least two harness layouts, got {}", codes.len());
    }
    create_dir(out)?;
    let mut rows = Vec::with_capacity(codes.len());
    let mut outcomes = Vec::with_capacity(codes.len());
    for code in codes {
        let harness = HarnessConfig::from_code(code).with_context(|| format!("layout {code}"))?;
        let sub = scenario.with_harness(harness);
        let dir = out.join(slug(code));
        let mut opts = options.clone();
        opts.cache = options.cache.as_ref().map(|c| c.join(format!("{}.cache", slug(code))));
        log::info!("optimizing {code}");
        let outcome = optimize_scenario(&sub, &opts, &dir)?;
        rows.push(ComparisonRow::new(&harness.code.to_string(), &outcome.result, &outcome.metrics));
        outcomes.push(outcome);
    }
    let report = ComparisonReport::new(Provenance::new("compare", scenario), rows);
    write_json(&out.join("report.json"), &report)?;
    write_file(&out.join("report.csv"), &report.to_csv()?)?;

    let categories: Vec<String> = InterfaceId::ALL
        .iter()
        .flat_map(|id| [format!("{} torque", id.name()), format!("{} force", id.name())])
        .collect();
    let series: Vec<Series<'_>> = report
        .rows
        .iter()
        .map(|r| Series {
            name: &r.config,
            values: r
                .wrench_rms
                .iter()
                .flat_map(|w| {
                    let norm = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
                    [norm(&w.rms[..3]), norm(&w.rms[3..])]
                })
                .collect(),
        })
        .collect();
    let bars = grouped_bars("RMS interaction wrench magnitude per interface (N·m, N)", "RMS", &categories, &series);
    write_file(&out.join("comparison_rms.svg"), bars.as_bytes())?;
    let labelled: Vec<(String, &EpisodeMetrics)> = codes.iter().zip(&outcomes).map(|(c, o)| (c.clone(), &o.metrics)).collect();
    write_file(&out.join("comparison_tracking.svg"), tracking_figure("Joint tracking differences", &labelled).as_bytes())?;
    Ok(report)
}

#[derive(Clone, Debug, Default)]
pub struct GaitOverrides {
    pub cadence: Option<f64>,
    pub variability: Option<f64>,
    pub sample_rate: Option<f64>,
}

pub fn gen_gait(scenario: &Scenario, overrides: &GaitOverrides, path: &Path) -> Result<()> {
    let mut spec = match &scenario.config.gait {
        GaitSource::Synthetic(s) => *s,
        GaitSource::File(_) => SyntheticGait { seed: scenario.seeds.gait, ..Default::default() },
    };
    spec.cadence = overrides.cadence.unwrap_or(spec.cadence);
    spec.variability = overrides.variability.unwrap_or(spec.variability);
    spec.sample_rate = overrides.sample_rate.unwrap_or(spec.sample_rate);
    let gait = synthetic_gait(&spec).context("cannot generate the synthetic gait")?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut provenance = Provenance::new("gen-gait", scenario);
    provenance.scenario.gait = GaitSource::Synthetic(spec);
    provenance.gait_sha256 = crate::config::gait_digest(&gait);
    let mut buf = provenance.comment_line().into_bytes();
    gait.write_csv(&mut buf)?;
    let mut file = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    file.write_all(&buf)?;
    Ok(())
}

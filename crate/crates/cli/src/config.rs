//! Scenario files and their resolution into ready-to-run inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use exoharness::harness::{HarnessConfig, HarnessFile, ImpedanceParams};
use exoharness::human::{synthetic_gait, GaitTrajectory, SyntheticGait};
use exoharness::model::{ExoskeletonModel, InterfaceId, ModelFile};
use exoharness::optimizer::{OptimizationResult, OptimizationSettings, VariableMap};
use exoharness::seed::SeedSet;
use exoharness::simulation::{default_pelvis, EpisodeSettings, InterfaceImpedances, PreparedEpisode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    File(PathBuf),
    Inline(ModelFile),
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Inline(ModelFile::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitSource {
    File(PathBuf),
    Synthetic(SyntheticGait),
}

impl Default for GaitSource {
    fn default() -> Self {
        GaitSource::Synthetic(SyntheticGait::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessSource {
    Preset(String),
    File(PathBuf),
    Inline(HarnessFile),
}

impl Default for HarnessSource {
    fn default() -> Self {
        HarnessSource::Preset("[3 3 2]".into())
    }
}

/// Explicit impedances: a default for every limb interface, per-interface
/// overrides and an optional pelvis override.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitImpedances {
    #[serde(default)]
    pub limbs: Option<ImpedanceParams>,
    #[serde(default)]
    pub interfaces: BTreeMap<InterfaceId, ImpedanceParams>,
    #[serde(default)]
    pub pelvis: Option<ImpedanceParams>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceSource {
    /// Every optimized variable at its upper bound.
    #[default]
    Anchor,
    /// Zero limb impedance, default pelvis.
    Detached,
    Explicit(ExplicitImpedances),
    /// The optimum stored in an `optimize` result file.
    Result(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub model: ModelSource,
    pub gait: GaitSource,
    pub harness: HarnessSource,
    pub impedance: ImpedanceSource,
    pub episode: EpisodeSettings,
    pub optimization: OptimizationSettings,
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let mut config: ScenarioConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid scenario file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    /// Makes relative file references relative to `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.model {
            ModelSource::File(p) => fix(p),
            ModelSource::Inline(_) => {}
        }
        if let GaitSource::File(p) = &mut self.gait {
            fix(p);
        }
        if let HarnessSource::File(p) = &mut self.harness {
            fix(p);
        }
        if let ImpedanceSource::Result(p) = &mut self.impedance {
            fix(p);
        }
        if let Some(p) = &mut self.output {
            fix(p);
        }
    }
}

/// A scenario with files loaded, models built and seeds applied.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub seeds: SeedSet,
    pub model: ModelFile,
    pub exo: Arc<ExoskeletonModel>,
    pub gait: Arc<GaitTrajectory>,
    pub harness: HarnessConfig,
}

impl Scenario {
    pub fn resolve(mut config: ScenarioConfig, seed_override: Option<u64>, preset: Option<&str>) -> Result<Self> {
        let root = seed_override.or(config.seed).unwrap_or(0);
        config.seed = Some(root);
        let seeds = SeedSet::from_root(root);
        config.episode.noise_seed = seeds.noise;
        config.episode.perturbation_seed = seeds.perturbation;
        if let Some(code) = preset {
            config.harness = HarnessSource::Preset(code.to_string());
        }

        let model = match &config.model {
            ModelSource::File(p) => ModelFile::load(p).with_context(|| format!("model file {}", p.display()))?,
            ModelSource::Inline(m) => m.clone(),
        };
        let exo = Arc::new(model.build().context("cannot build the exoskeleton model")?);

        let gait = match &mut config.gait {
            GaitSource::File(p) => {
                if !p.exists() {
                    bail!("gait file {} does not exist", p.display());
                }
                GaitTrajectory::load(p).with_context(|| format!("gait file {}", p.display()))?
            }
            GaitSource::Synthetic(s) => {
                s.seed = seeds.gait;
                synthetic_gait(s).context("cannot generate the synthetic gait")?
            }
        };

        let harness_file = match &config.harness {
            HarnessSource::Preset(code) => HarnessFile { code: code.clone(), masks: None, lock: config.episode.lock },
            HarnessSource::File(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read harness file {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("invalid harness file {}", p.display()))?
            }
            HarnessSource::Inline(h) => h.clone(),
        };
        let harness = harness_file.resolve().context("invalid harness layout")?;
        config.episode.lock = harness_file.lock;

        config.episode.validate()?;
        config.optimization.metrics.validate()?;
        config.optimization.bounds.validate()?;
        config.optimization.solver.validate()?;
        if let ImpedanceSource::Result(p) = &config.impedance {
            if !p.exists() {
                bail!("result file {} does not exist", p.display());
            }
        }
        Ok(Scenario { config, seeds, model, exo, gait: Arc::new(gait), harness })
    }

    pub fn with_harness(&self, harness: HarnessConfig) -> Self {
        let mut s = self.clone();
        s.config.harness = HarnessSource::Preset(harness.code.to_string());
        s.harness = harness;
        s
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.config.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn prepare(&self) -> Result<PreparedEpisode> {
        PreparedEpisode::new(self.exo.clone(), &self.harness, &self.gait, &self.config.episode)
            .context("cannot prepare the episode")
    }

    pub fn variable_map(&self) -> Result<VariableMap> {
        let o = &self.config.optimization;
        Ok(VariableMap::new(&self.harness, o.tie_legs, &o.bounds, self.exo.total_mass)?)
    }

    pub fn impedances(&self) -> Result<InterfaceImpedances> {
        let pelvis = default_pelvis(self.exo.total_mass);
        Ok(match &self.config.impedance {
            ImpedanceSource::Anchor => {
                let map = self.variable_map()?;
                map.impedances(&map.to_physical(&vec![1.0; map.dimension()]), pelvis)
            }
            ImpedanceSource::Detached => InterfaceImpedances::detached(self.exo.total_mass),
            ImpedanceSource::Explicit(e) => {
                let mut imp = InterfaceImpedances::uniform(e.limbs.unwrap_or(ImpedanceParams::zero()), e.pelvis.unwrap_or(pelvis));
                for (id, p) in &e.interfaces {
                    *imp.get_mut(*id) = *p;
                }
                imp.validate()?;
                imp
            }
            ImpedanceSource::Result(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read result file {}", p.display()))?;
                let doc: ResultDocument =
                    serde_json::from_str(&text).with_context(|| format!("invalid result file {}", p.display()))?;
                doc.result.impedances
            }
        })
    }

    /// SHA-256 of the gait samples driving the scenario.
    pub fn gait_digest(&self) -> String {
        gait_digest(&self.gait)
    }
}

/// SHA-256 over the little-endian bytes of the sample times and channels.
pub fn gait_digest(gait: &GaitTrajectory) -> String {
    let mut h = Sha256::new();
    for v in gait.times.iter().chain(gait.channels.iter().flatten()) {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Full resolved configuration carried by every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub seeds: SeedSet,
    pub gait_sha256: String,
    pub scenario: ScenarioConfig,
}

impl Provenance {
    pub fn new(command: &str, scenario: &Scenario) -> Self {
        let mut config = scenario.config.clone();
        config.model = ModelSource::Inline(scenario.model.clone());
        Provenance {
            tool: "exoharness".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: scenario.seeds.root,
            seeds: scenario.seeds,
            gait_sha256: scenario.gait_digest(),
            scenario: config,
        }
    }

    /// One-line form for CSV headers.
    pub fn comment_line(&self) -> String {
        format!("# provenance: {}\n", serde_json::to_string(self).expect("provenance serializes"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultDocument {
    pub provenance: Provenance,
    pub result: OptimizationResult,
}

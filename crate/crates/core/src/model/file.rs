use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_exoskeleton, Anthropometrics, ExoskeletonModel, ModelError, ModelLayout, Percentile};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Either a shipped percentile label (`"p50"`) or an explicit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnthropometricsSource {
    Percentile(String),
    Explicit(Anthropometrics),
}

impl AnthropometricsSource {
    pub fn resolve(&self) -> Result<Anthropometrics, ModelError> {
        match self {
            AnthropometricsSource::Percentile(label) => Percentile::parse(label)
                .map(Anthropometrics::percentile)
                .ok_or_else(|| ModelError::File(format!("unknown percentile '{label}' (expected p025, p50 or p975)"))),
            AnthropometricsSource::Explicit(a) => {
                a.validate()?;
                Ok(a.clone())
            }
        }
    }
}

fn default_total_mass() -> f64 {
    19.0
}

/// Model description file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub anthropometrics: AnthropometricsSource,
    #[serde(default = "default_total_mass")]
    pub total_mass: f64,
    #[serde(default)]
    pub layout: ModelLayout,
}

impl Default for ModelFile {
    fn default() -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            anthropometrics: AnthropometricsSource::Percentile("p50".into()),
            total_mass: default_total_mass(),
            layout: ModelLayout::default(),
        }
    }
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::File(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::File(format!(
                "unsupported format_version {} (this build reads {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ModelError::File(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn build(&self) -> Result<ExoskeletonModel, ModelError> {
        build_exoskeleton(&self.anthropometrics.resolve()?, self.total_mass, &self.layout)
    }
}

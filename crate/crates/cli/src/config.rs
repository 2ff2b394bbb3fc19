use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tot_core::dataset::SynthConfig;
use tot_core::decision::{Policy, DEFAULT_EPSILON_S};
use tot_core::eval::{AblationSpec, ExperimentSpec};
use tot_core::features::FeatureMask;

use crate::error::CliError;

/// Environment variable that overrides `paths.reports`.
pub const REPORT_DIR_ENV: &str = "TOT_REPORT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub events: PathBuf,
    pub checkpoint: PathBuf,
    pub ori_checkpoint: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            events: "data/events.jsonl".into(),
            checkpoint: "runs/model.ckpt".into(),
            ori_checkpoint: "runs/ori.ckpt".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSection {
    /// Masks such as `H+S+O`, one report row each.
    pub masks: Vec<String>,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            masks: FeatureMask::ablation_defaults()
                .iter()
                .map(|m| m.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub fractions: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            fractions: vec![0.75, 0.9, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OriSection {
    /// Synthetic readiness-rated events per activity.
    pub per_activity: usize,
    /// Frames between consecutive labelled windows.
    pub label_stride: usize,
    pub epochs: usize,
}

impl Default for OriSection {
    fn default() -> Self {
        OriSection {
            per_activity: 20,
            label_stride: 30,
            epochs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionSection {
    pub epsilon_s: f64,
    pub policy: Policy,
    /// Frames between streamed predictions.
    pub stride_frames: usize,
}

impl Default for DecisionSection {
    fn default() -> Self {
        DecisionSection {
            epsilon_s: DEFAULT_EPSILON_S,
            policy: Policy::default(),
            stride_frames: 1,
        }
    }
}

/// Everything a command needs, stored as TOML.
///
/// `seed` drives single-run commands: it becomes the generator seed, the
/// model initialization seed and the shuffle seed. Multi-seed commands use
/// `experiment.seeds`; the event split always uses `experiment.split.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: Paths,
    pub experiment: ExperimentSpec,
    pub ablation: AblationSection,
    pub sweep: SweepSection,
    pub ori: OriSection,
    pub decision: DecisionSection,
    pub synth: SynthConfig,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Applies the seed override and the report directory override, then
    /// copies the global seed into every single-run component.
    pub fn resolve(
        mut self,
        seed: Option<u64>,
        report_dir: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(dir) = report_dir {
            self.paths.reports = dir;
        }
        self.synth.seed = self.seed;
        self.experiment.model.seed = self.seed;
        self.experiment.train.seed = self.seed;
        self.experiment.model.input_dim = tot_core::features::feature_dim(self.experiment.mask)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment.validate()?;
        self.synth.validate()?;
        self.ablation_spec()?.validate()?;
        if self
            .sweep
            .fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return Err(CliError::Usage("sweep fractions must lie in (0, 1]".into()));
        }
        if self.ori.per_activity == 0 || self.ori.label_stride == 0 {
            return Err(CliError::Usage(
                "ori.per_activity and ori.label_stride must be >= 1".into(),
            ));
        }
        if !(self.decision.epsilon_s.is_finite() && self.decision.epsilon_s >= 0.0) {
            return Err(CliError::Usage(
                "decision.epsilon_s must be finite and >= 0".into(),
            ));
        }
        if self.decision.stride_frames == 0 {
            return Err(CliError::Usage(
                "decision.stride_frames must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn ablation_spec(&self) -> Result<AblationSpec, CliError> {
        let masks = self
            .ablation
            .masks
            .iter()
            .map(|m| m.parse::<FeatureMask>())
            .collect::<tot_core::Result<Vec<_>>>()?;
        Ok(AblationSpec {
            masks,
            base: self.experiment.clone(),
        })
    }
}

/// Report directory from the environment, if set and non-empty.
pub fn report_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(REPORT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

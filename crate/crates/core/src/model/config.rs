use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four recurrent architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One LSTM, one point triple.
    BaselineLstm,
    /// One LSTM per component time; input and output layers shared.
    IndependentLstms,
    /// One LSTM, `K` candidate triples with probabilities.
    BaselineLstmMm,
    /// Three LSTMs whose final states are concatenated into a `K`-mode head.
    IndependentLstmsMm,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::BaselineLstm,
        Variant::IndependentLstms,
        Variant::BaselineLstmMm,
        Variant::IndependentLstmsMm,
    ];

    pub fn num_cells(&self) -> usize {
        match self {
            Variant::BaselineLstm | Variant::BaselineLstmMm => 1,
            Variant::IndependentLstms | Variant::IndependentLstmsMm => 3,
        }
    }

    pub fn is_multimodal(&self) -> bool {
        matches!(self, Variant::BaselineLstmMm | Variant::IndependentLstmsMm)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::BaselineLstm => "baseline_lstm",
            Variant::IndependentLstms => "independent_lstms",
            Variant::BaselineLstmMm => "baseline_lstm_mm",
            Variant::IndependentLstmsMm => "independent_lstms_mm",
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Variant::BaselineLstm => 0,
            Variant::IndependentLstms => 1,
            Variant::BaselineLstmMm => 2,
            Variant::IndependentLstmsMm => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Variant::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant `{s}`; expected one of {}",
                    Variant::ALL.map(|v| v.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Modes per prediction; ignored by point variants.
    pub num_modes: usize,
    /// Rows per input window (2 s of frames).
    pub window_frames: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::IndependentLstms,
            input_dim: crate::features::FULL_DIM,
            hidden_dim: 64,
            num_modes: 3,
            window_frames: 60,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        if self.window_frames == 0 {
            return Err(Error::Config("window_frames must be >= 1".into()));
        }
        if self.variant.is_multimodal() && self.num_modes < 2 {
            return Err(Error::Config(format!(
                "{} needs at least 2 modes, got {}",
                self.variant, self.num_modes
            )));
        }
        Ok(())
    }

    /// Number of modes actually produced.
    pub fn modes(&self) -> usize {
        if self.variant.is_multimodal() {
            self.num_modes
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seed of the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.eps > 0.0) {
            return Err(Error::Config(
                "learning rate and eps must be positive".into(),
            ));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalMode, MaeReport};
use crate::dataset::{
    build_training_set, split_events, subsample, SampleSet, SplitSpec, TakeoverEvent,
};
use crate::error::{Error, Result};
use crate::features::{feature_dim, FeatureMask};
use crate::model::{fit, History, Model, ModelConfig, TrainConfig};

/// Split that a finished model is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    #[default]
    Val,
    Test,
}

/// One training configuration repeated over several seeds.
///
/// The event split is fixed by `split.seed`; each run seed sets both the model
/// initialization and the minibatch shuffle. `model.input_dim` is replaced by
/// the width of `mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub mask: FeatureMask,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub seeds: Vec<u64>,
    pub augment: bool,
    pub eval_mode: EvalMode,
    pub eval_split: EvalSplit,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mask: FeatureMask::ALL,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            seeds: vec![0, 1, 2, 3, 4],
            augment: true,
            eval_mode: EvalMode::MostProbable,
            eval_split: EvalSplit::Val,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.mask.validate()?;
        self.model_config(0)?.validate()?;
        self.train.validate()?;
        self.split.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.eval_mode == EvalMode::BestOfK && !self.model.variant.is_multimodal() {
            return Err(Error::VariantMismatch(format!(
                "best-of-K evaluation needs a multimodal model, not {}",
                self.model.variant
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, seed: u64) -> Result<ModelConfig> {
        Ok(ModelConfig {
            input_dim: feature_dim(self.mask)?,
            seed,
            ..self.model
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub report: MaeReport,
    /// Per-epoch training loss and MAE on the scored split.
    pub history: History,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub label: String,
    /// Column-wise mean over `runs`.
    pub mean: MaeReport,
    pub runs: Vec<SeedRun>,
}

fn dataset_name(augment: bool, split: EvalSplit, train_events: usize) -> String {
    let kind = if augment { "augmented" } else { "raw" };
    let split = match split {
        EvalSplit::Val => "val",
        EvalSplit::Test => "test",
    };
    format!("{kind} train ({train_events} events), {split}")
}

fn run_on(
    events: &[TakeoverEvent],
    spec: &ExperimentSpec,
    train_idx: &[usize],
    eval_idx: &[usize],
    label: &str,
) -> Result<ExperimentRow> {
    if train_idx.is_empty() || eval_idx.is_empty() {
        return Err(Error::Config(format!(
            "`{label}` has {} training and {} evaluation events; both must be non-empty",
            train_idx.len(),
            eval_idx.len()
        )));
    }
    let train_set = build_training_set(
        train_idx.iter().map(|&i| &events[i]),
        spec.mask,
        spec.augment,
    )?;
    let eval_set = SampleSet::raw(eval_idx.iter().map(|&i| &events[i]), spec.mask)?;
    let dataset = dataset_name(spec.augment, spec.eval_split, train_idx.len());
    let mut runs = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let mut model = Model::new(spec.model_config(seed)?)?;
        let history = fit(
            &mut model,
            &train_set,
            Some(&eval_set),
            &spec.train_config(seed),
            |_| {},
        )?;
        let mut report = evaluate(&model, &eval_set, spec.eval_mode)?.with_label(label);
        report.dataset = dataset.clone();
        runs.push(SeedRun {
            seed,
            report,
            history,
        });
    }
    let reports: Vec<MaeReport> = runs.iter().map(|r| r.report.clone()).collect();
    Ok(ExperimentRow {
        label: label.to_string(),
        mean: MaeReport::mean(&reports)?,
        runs,
    })
}

fn eval_part(split: &crate::dataset::EventSplit, which: EvalSplit) -> &[usize] {
    match which {
        EvalSplit::Val => &split.val,
        EvalSplit::Test => &split.test,
    }
}

/// Trains on the train split once per seed and scores the chosen split.
pub fn run_experiment(
    events: &[TakeoverEvent],
    spec: &ExperimentSpec,
    label: &str,
) -> Result<ExperimentRow> {
    spec.validate()?;
    let split = split_events(events, &spec.split)?;
    run_on(
        events,
        spec,
        &split.train,
        eval_part(&split, spec.eval_split),
        label,
    )
}

/// A grid of feature masks sharing one model, training setup and seed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSpec {
    pub masks: Vec<FeatureMask>,
    /// Everything except the mask, which is taken from `masks`.
    pub base: ExperimentSpec,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            masks: FeatureMask::ablation_defaults(),
            base: ExperimentSpec::default(),
        }
    }
}

impl AblationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.masks.is_empty() {
            return Err(Error::Config("ablation needs at least one mask".into()));
        }
        for &mask in &self.masks {
            ExperimentSpec {
                mask,
                ..self.base.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

/// One row per mask, each averaged over the seeds; all masks share one split.
pub fn ablate(events: &[TakeoverEvent], spec: &AblationSpec) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    let split = split_events(events, &spec.base.split)?;
    spec.masks
        .iter()
        .map(|&mask| {
            let exp = ExperimentSpec {
                mask,
                ..spec.base.clone()
            };
            run_on(
                events,
                &exp,
                &split.train,
                eval_part(&split, exp.eval_split),
                &mask.to_string(),
            )
        })
        .collect()
}

/// Trains on seeded subsets of the train split and scores the fixed test split.
///
/// The subset for fraction `f` holds `round(f * |train|)` events and is drawn
/// with `spec.split.seed`, so every run seed sees the same events.
pub fn fraction_sweep(
    events: &[TakeoverEvent],
    spec: &ExperimentSpec,
    fractions: &[f64],
) -> Result<Vec<ExperimentRow>> {
    let spec = ExperimentSpec {
        eval_split: EvalSplit::Test,
        ..spec.clone()
    };
    spec.validate()?;
    if fractions.is_empty() {
        return Err(Error::Config("no training fractions given".into()));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("fraction {f} must be in (0, 1]")));
        }
    }
    let split = split_events(events, &spec.split)?;
    fractions
        .iter()
        .map(|&f| {
            let train = subsample(&split.train, f, spec.split.seed)?;
            run_on(events, &spec, &train, &split.test, &format!("{f}"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationComparison {
    pub raw: ExperimentRow,
    pub augmented: ExperimentRow,
}

/// The same split, seeds and initializations, trained once on raw windows
/// and once with augmentation.
pub fn compare_augmentation(
    events: &[TakeoverEvent],
    spec: &ExperimentSpec,
) -> Result<AugmentationComparison> {
    spec.validate()?;
    let split = split_events(events, &spec.split)?;
    let eval = eval_part(&split, spec.eval_split);
    let raw = ExperimentSpec {
        augment: false,
        ..spec.clone()
    };
    let aug = ExperimentSpec {
        augment: true,
        ..spec.clone()
    };
    Ok(AugmentationComparison {
        raw: run_on(events, &raw, &split.train, eval, "raw")?,
        augmented: run_on(events, &aug, &split.train, eval, "augmented")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_events, SynthConfig};
    use crate::model::Variant;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            mask: "H+S".parse().unwrap(),
            model: ModelConfig {
                variant: Variant::BaselineLstm,
                hidden_dim: 3,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                epochs: 1,
                batch_size: 16,
                ..TrainConfig::default()
            },
            split: SplitSpec {
                train: 0.5,
                val: 0.25,
                test: 0.25,
                seed: 3,
            },
            seeds: vec![1, 2],
            augment: false,
            ..ExperimentSpec::default()
        }
    }

    fn events() -> Vec<TakeoverEvent> {
        synthesize_events(&SynthConfig::balanced(2, 4))
            .unwrap()
            .events
    }

    #[test]
    fn ablation_shapes() {
        let ev = events();
        let ab = AblationSpec {
            masks: vec!["F".parse().unwrap(), FeatureMask::ALL],
            base: spec(),
        };
        let rows = ablate(&ev, &ab).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].label, "F");
        assert_eq!(rows[1].runs.len(), 2);
        assert_eq!(rows[1].runs[0].history.len(), 1);
    }

    #[test]
    fn full_fraction_matches_plain_run() {
        let ev = events();
        let s = ExperimentSpec {
            eval_split: EvalSplit::Test,
            ..spec()
        };
        let sweep = fraction_sweep(&ev, &s, &[0.5, 1.0]).unwrap();
        assert_eq!(sweep.len(), 2);
        let plain = run_experiment(&ev, &s, "1").unwrap();
        assert_eq!(sweep[1].mean.columns(), plain.mean.columns());
        assert!(fraction_sweep(&ev, &s, &[0.0]).is_err());
    }

    #[test]
    fn best_of_k_needs_multimodal() {
        let s = ExperimentSpec {
            eval_mode: EvalMode::BestOfK,
            ..spec()
        };
        assert!(matches!(s.validate(), Err(Error::VariantMismatch(_))));
    }

    #[test]
    fn reproducible() {
        let ev = events();
        let a = compare_augmentation(&ev, &spec()).unwrap();
        let b = compare_augmentation(&ev, &spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.raw.mean.samples, a.augmented.mean.samples);
    }
}

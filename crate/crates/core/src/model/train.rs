use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::backprop::{Backprop, Examples};
use super::config::{ModelConfig, TrainConfig};
use super::network::{Model, Task};
use crate::dataset::{ReadinessSet, SampleSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalMode, MaeReport};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's minibatches, weighted by batch size.
    pub train_loss: f64,
    pub val: Option<MaeReport>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

fn check_examples<E: Examples + ?Sized>(model: &Model, data: &E, dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Shape("training set is empty".into()));
    }
    let cfg = model.config();
    if dim != cfg.input_dim {
        return Err(Error::Shape(format!(
            "samples have {dim} features but the model expects {}",
            cfg.input_dim
        )));
    }
    model.check_window(data.window(0))
}

/// Trains a fresh model built from `model_cfg`.
pub fn train(
    train: &SampleSet,
    val: Option<&SampleSet>,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, History)> {
    let mut model = Model::new(*model_cfg)?;
    let history = fit(&mut model, train, val, cfg, |_| {})?;
    Ok((model, history))
}

/// Continues training `model` (all parameters) on `train`.
///
/// Each epoch visits a fresh shuffle of the samples in minibatches, takes one
/// Adam step per minibatch and, with a validation set, records its MAEs.
pub fn fit(
    model: &mut Model,
    train: &SampleSet,
    val: Option<&SampleSet>,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    if model.task() != Task::Takeover {
        return Err(Error::VariantMismatch(
            "readiness models are trained with pretrain_ori".into(),
        ));
    }
    check_examples(model, train, train.dim())?;
    if let Some(v) = val {
        if v.dim() != model.config().input_dim {
            return Err(Error::Shape(
                "validation features differ from the model input".into(),
            ));
        }
    }
    run_epochs(model, train, cfg, on_epoch, |m| {
        val.map(|v| evaluate(m, v, EvalMode::MostProbable))
            .transpose()
    })
}

fn run_epochs<E: Examples + ?Sized>(
    model: &mut Model,
    data: &E,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
    mut validate: impl FnMut(&Model) -> Result<Option<MaeReport>>,
) -> Result<History> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::for_model(cfg.adam, model);
    let mut bp = Backprop::new(model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            bp.reset();
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                loss += bp.accumulate(model, data.window(i), data.target(i), scale)?;
            }
            adam.step_model(model, bp.grad())?;
            epoch_loss += loss * batch.len() as f64;
        }
        let train_loss = epoch_loss / data.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val: validate(model)?,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok(history)
}

/// Trains a readiness-index model (sigmoid head, squared error) on labelled windows.
pub fn pretrain_ori(
    data: &ReadinessSet,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, History)> {
    let mut model = Model::new_readiness(*model_cfg)?;
    check_examples(&model, data, data.dim())?;
    let history = run_epochs(&mut model, data, cfg, |_| {}, |_| Ok(None))?;
    Ok((model, history))
}

/// A take-over model whose input transform and LSTM cells are copied from
/// `pretrained`; the output head is freshly initialized from `config.seed`.
pub fn transfer(pretrained: &Model, config: &ModelConfig) -> Result<Model> {
    let src = pretrained.config();
    if src.input_dim != config.input_dim
        || src.hidden_dim != config.hidden_dim
        || src.variant.num_cells() != config.variant.num_cells()
        || src.window_frames != config.window_frames
    {
        return Err(Error::Incompatible(format!(
            "pretrained trunk ({} inputs, {} hidden, {} cells, {} frames) does not fit \
             ({} inputs, {} hidden, {} cells, {} frames)",
            src.input_dim,
            src.hidden_dim,
            src.variant.num_cells(),
            src.window_frames,
            config.input_dim,
            config.hidden_dim,
            config.variant.num_cells(),
            config.window_frames
        )));
    }
    let mut model = Model::new(*config)?;
    model.input = pretrained.input.clone();
    model.cells = pretrained.cells.clone();
    Ok(model)
}

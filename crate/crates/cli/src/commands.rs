use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tot_core::dataset::{
    build_training_set, load_events, save_events, split_events, synthesize_events,
    synthesize_ori_labels, write_atomic, Activity, EventSplit, FrameRecord, ReadinessSet,
    SampleSet, TakeoverEvent,
};
use tot_core::decision::{decide as decide_rule, decide_mm, Decision, Policy, StreamPredictor};
use tot_core::eval::{
    ablate as run_ablation, evaluate, fraction_sweep, report_csv, write_curves_csv,
    write_report_csv, EvalMode, ExperimentRow, MaeReport,
};
use tot_core::features::{feature_dim, flatten_into, FeatureMask, FrameFeatures};
use tot_core::model::{
    fit, load_checkpoint, pretrain_ori as run_pretrain, save_checkpoint, transfer, History, Model,
    Prediction, Task, TrainConfig, Variant,
};
use tot_core::Error;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::{PredictInput, TrainOverrides};

fn io_err(e: io::Error) -> CliError {
    CliError::Data(format!("writing output: {e}"))
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &TrainOverrides) -> Result<(), CliError> {
    if let Some(m) = &o.mask {
        cfg.experiment.mask = m.parse()?;
    }
    if let Some(v) = &o.variant {
        cfg.experiment.model.variant = v.parse::<Variant>()?;
    }
    if let Some(e) = o.epochs {
        cfg.experiment.train.epochs = e;
    }
    if let Some(h) = o.hidden {
        cfg.experiment.model.hidden_dim = h;
    }
    if let Some(k) = o.modes {
        cfg.experiment.model.num_modes = k;
    }
    if let Some(p) = &o.events {
        cfg.paths.events = p.clone();
    }
    cfg.experiment.model.input_dim = feature_dim(cfg.experiment.mask)?;
    cfg.validate()
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn config(cfg: &ExperimentConfig, dump: bool) -> Result<(), CliError> {
    if dump {
        print!("{}", cfg.to_toml());
    } else {
        println!(
            "configuration is valid: {} on mask {} ({} inputs), seed {}",
            cfg.experiment.model.variant,
            cfg.experiment.mask,
            cfg.experiment.model.input_dim,
            cfg.seed
        );
    }
    Ok(())
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-activity counts and mean (standard deviation) of each time.
pub fn summary(events: &[TakeoverEvent]) -> String {
    let mut by_activity: BTreeMap<Activity, Vec<[f64; 4]>> = BTreeMap::new();
    for e in events {
        let t = e.times;
        by_activity
            .entry(e.activity)
            .or_default()
            .push([t.eyes, t.foot, t.hands, t.takeover()]);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>6} {:>14} {:>14} {:>14} {:>14}",
        "activity", "events", "eyes_s", "foot_s", "hands_s", "takeover_s"
    );
    for (activity, rows) in &by_activity {
        let _ = write!(out, "{:<22} {:>6}", activity.label(), rows.len());
        for c in 0..4 {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (m, s) = mean_sd(&col);
            let _ = write!(out, " {:>14}", format!("{m:.2} ({s:.2})"));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{:<22} {:>6}", "total", events.len());
    out
}

pub fn gen_data(
    cfg: ExperimentConfig,
    out: Option<PathBuf>,
    per_activity: Option<usize>,
    total: Option<usize>,
) -> Result<(), CliError> {
    let mut synth = cfg.synth.clone();
    if let Some(n) = per_activity {
        for p in &mut synth.activities {
            p.count = n;
        }
    }
    if let Some(n) = total {
        synth.set_total(n);
    }
    let data = synthesize_events(&synth)?;
    let path = out.unwrap_or(cfg.paths.events);
    save_events(&data.events, &path)?;
    print!("{}", summary(&data.events));
    println!("wrote {}", path.display());
    Ok(())
}

fn history_csv(history: &History, config: &str) -> String {
    let mut out = String::new();
    for line in config.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("epoch,train_loss,val_eyes_mae_s,val_foot_mae_s,val_hands_mae_s,val_overall_mae_s,val_takeover_mae_s\n");
    for r in &history.epochs {
        let _ = write!(out, "{},{:.6}", r.epoch, r.train_loss);
        match &r.val {
            Some(v) => {
                for c in v.columns() {
                    let _ = write!(out, ",{c:.6}");
                }
            }
            None => out.push_str(",,,,,"),
        }
        out.push('\n');
    }
    out
}

fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.csv")
}

pub fn train(
    mut cfg: ExperimentConfig,
    overrides: &TrainOverrides,
    augment: Option<bool>,
    from_ori: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, overrides)?;
    if let Some(a) = augment {
        cfg.experiment.augment = a;
    }
    let pretrained = from_ori.as_deref().map(load_checkpoint).transpose()?;
    let events = load_events(&cfg.paths.events)?;
    let spec = &cfg.experiment;
    let split = split_events(&events, &spec.split)?;
    let train_events = EventSplit::select(&events, &split.train);
    let train_set = build_training_set(train_events.iter().copied(), spec.mask, spec.augment)?;
    println!(
        "train events {}: raw samples {}, augmented samples {}, total {}",
        train_events.len(),
        train_set.raw_count(),
        train_set.augmented_count(),
        train_set.len()
    );
    let val = if split.val.is_empty() {
        None
    } else {
        Some(SampleSet::raw(
            EventSplit::select(&events, &split.val),
            spec.mask,
        )?)
    };
    let mut model = match &pretrained {
        Some(p) => transfer(p, &spec.model)?,
        None => Model::new(spec.model)?,
    };
    let history = fit(
        &mut model,
        &train_set,
        val.as_ref(),
        &spec.train,
        |r| match &r.val {
            Some(v) => eprintln!(
                "epoch {:>3}  loss {:.4}  val overall MAE {:.4} s",
                r.epoch, r.train_loss, v.overall_mae_s
            ),
            None => eprintln!("epoch {:>3}  loss {:.4}", r.epoch, r.train_loss),
        },
    )?;
    let path = out.unwrap_or_else(|| cfg.paths.checkpoint.clone());
    let body = history_csv(&history, &cfg.to_toml());
    write_atomic(&history_path(&path), |w| w.write_all(body.as_bytes()))?;
    save_checkpoint(&model, &path)?;
    println!(
        "wrote {} and {}",
        path.display(),
        history_path(&path).display()
    );
    Ok(())
}

pub fn pretrain_ori(
    mut cfg: ExperimentConfig,
    overrides: &TrainOverrides,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, overrides)?;
    let mut synth = cfg.synth.clone();
    for p in &mut synth.activities {
        p.count = cfg.ori.per_activity;
    }
    let data = synthesize_events(&synth)?;
    let labels = synthesize_ori_labels(&data, cfg.ori.label_stride, cfg.seed)?;
    let set = ReadinessSet::new(&data.events, labels, cfg.experiment.mask)?;
    let train_cfg = TrainConfig {
        epochs: overrides.epochs.unwrap_or(cfg.ori.epochs),
        ..cfg.experiment.train
    };
    println!(
        "{} rated windows from {} events",
        set.len(),
        data.events.len()
    );
    let (model, history) = run_pretrain(&set, &cfg.experiment.model, &train_cfg)?;
    if let Some(last) = history.last() {
        println!("final readiness loss {:.6}", last.train_loss);
    }
    let path = out.unwrap_or_else(|| cfg.paths.ori_checkpoint.clone());
    let body = history_csv(&history, &cfg.to_toml());
    write_atomic(&history_path(&path), |w| w.write_all(body.as_bytes()))?;
    save_checkpoint(&model, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// The mask to feed `model`, checked against its input width.
fn model_mask(
    cfg: &ExperimentConfig,
    model: &Model,
    mask: Option<&str>,
) -> Result<FeatureMask, CliError> {
    let mask = match mask {
        Some(m) => m.parse()?,
        None => cfg.experiment.mask,
    };
    let dim = feature_dim(mask)?;
    if dim != model.config().input_dim {
        return Err(CliError::Usage(format!(
            "mask {mask} gives {dim} features but the checkpoint expects {}; pass --mask",
            model.config().input_dim
        )));
    }
    Ok(mask)
}

fn takeover_model(path: &Path) -> Result<Model, CliError> {
    let model = load_checkpoint(path)?;
    if model.task() != Task::Takeover {
        return Err(CliError::Usage(format!(
            "{} is a readiness checkpoint; it has no take-over head",
            path.display()
        )));
    }
    Ok(model)
}

pub fn eval(
    cfg: ExperimentConfig,
    checkpoint: &Path,
    events: Option<PathBuf>,
    mask: Option<String>,
    best_of_k: bool,
    split: &str,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let model = takeover_model(checkpoint)?;
    let mask = model_mask(&cfg, &model, mask.as_deref())?;
    let path = events.unwrap_or_else(|| cfg.paths.events.clone());
    let events = load_events(&path)?;
    let chosen: Vec<usize> = match split {
        "all" => (0..events.len()).collect(),
        "train" | "val" | "test" => {
            let parts = split_events(&events, &cfg.experiment.split)?;
            match split {
                "train" => parts.train,
                "val" => parts.val,
                _ => parts.test,
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown split `{other}` (expected all, train, val or test)"
            )))
        }
    };
    if chosen.is_empty() {
        return Err(CliError::Usage(format!("the {split} split has no events")));
    }
    let set = SampleSet::raw(EventSplit::select(&events, &chosen), mask)?;
    let mode = if best_of_k {
        EvalMode::BestOfK
    } else {
        EvalMode::MostProbable
    };
    let mut report = evaluate(&model, &set, mode)?;
    report.label = checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.dataset = format!("{}:{split}", dataset_name(&path));
    print!("{}", report_csv(std::slice::from_ref(&report), ""));
    if let Some(out) = out {
        write_report_csv(&out, &[report], &cfg.to_toml())?;
    }
    Ok(())
}

fn row_reports(rows: &[ExperimentRow], dataset: &str) -> Vec<MaeReport> {
    rows.iter()
        .map(|r| {
            let mut m = r.mean.clone().with_label(&r.label);
            m.dataset = dataset.to_string();
            m
        })
        .collect()
}

fn write_table(cfg: &ExperimentConfig, rows: &[ExperimentRow], name: &str) -> Result<(), CliError> {
    let reports = row_reports(rows, &dataset_name(&cfg.paths.events));
    let echo = cfg.to_toml();
    let table = cfg.paths.reports.join(format!("{name}.csv"));
    let curves = cfg.paths.reports.join(format!("{name}_curves.csv"));
    write_report_csv(&table, &reports, &echo)?;
    write_curves_csv(&curves, rows, &echo)?;
    print!("{}", report_csv(&reports, ""));
    println!("wrote {} and {}", table.display(), curves.display());
    Ok(())
}

pub fn ablate(mut cfg: ExperimentConfig, overrides: &TrainOverrides) -> Result<(), CliError> {
    apply_overrides(&mut cfg, overrides)?;
    let spec = cfg.ablation_spec()?;
    let events = load_events(&cfg.paths.events)?;
    let rows = run_ablation(&events, &spec)?;
    write_table(&cfg, &rows, "ablation")
}

pub fn sweep(
    mut cfg: ExperimentConfig,
    overrides: &TrainOverrides,
    fractions: Option<Vec<f64>>,
) -> Result<(), CliError> {
    if let Some(f) = fractions {
        cfg.sweep.fractions = f;
    }
    apply_overrides(&mut cfg, overrides)?;
    let events = load_events(&cfg.paths.events)?;
    let rows = fraction_sweep(&events, &cfg.experiment, &cfg.sweep.fractions)?;
    write_table(&cfg, &rows, "sweep")
}

#[derive(Serialize)]
struct ModeRecord {
    eyes_s: f64,
    foot_s: f64,
    hands_s: f64,
    takeover_s: f64,
    prob: f64,
}

#[derive(Serialize)]
struct PredictionRecord {
    end_frame: usize,
    timestamp_s: f64,
    modes: Vec<ModeRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<DecisionRecord>,
}

#[derive(Serialize)]
struct DecisionRecord {
    verdict: String,
    tot_s: f64,
    margin_s: f64,
    ttc_s: f64,
    epsilon_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    mode_verdicts: Vec<String>,
}

impl DecisionRecord {
    fn new(d: &Decision, ttc_s: f64, epsilon_s: f64, policy: Option<Policy>) -> Self {
        DecisionRecord {
            verdict: d.verdict.to_string(),
            tot_s: d.tot_s,
            margin_s: d.margin_s,
            ttc_s,
            epsilon_s,
            policy: policy.map(|p| p.to_string()),
            mode_verdicts: d.mode_verdicts.iter().map(|v| v.to_string()).collect(),
        }
    }
}

fn mode_records(pred: &Prediction) -> Vec<ModeRecord> {
    pred.modes()
        .iter()
        .map(|m| ModeRecord {
            eyes_s: m.times.eyes,
            foot_s: m.times.foot,
            hands_s: m.times.hands,
            takeover_s: m.times.takeover(),
            prob: m.prob,
        })
        .collect()
}

fn parse_frame(text: &str, line: usize) -> Result<FrameFeatures, CliError> {
    let record: FrameRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    record.to_frame().map_err(|e| {
        CliError::from(Error::Parse {
            line,
            message: e.to_string(),
        })
    })
}

/// Calls `emit` for every prediction the input asks for.
fn for_each_prediction(
    cfg: &ExperimentConfig,
    input: &PredictInput,
    mut emit: impl FnMut(usize, f64, Prediction) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let model = takeover_model(&input.checkpoint)?;
    let mask = model_mask(cfg, &model, input.mask.as_deref())?;
    if input.stream {
        let stride = input.stride.unwrap_or(cfg.decision.stride_frames);
        let mut sp = StreamPredictor::new(&model, mask, stride)?;
        for (i, line) in io::stdin().lock().lines().enumerate() {
            let line = line.map_err(|e| CliError::Data(format!("reading standard input: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let frame = parse_frame(&line, i + 1)?;
            if let Some(o) = sp.push(&frame)? {
                emit(o.end_frame, o.timestamp_s, o.prediction)?;
            }
        }
        return Ok(());
    }
    let path = input
        .window
        .as_ref()
        .ok_or_else(|| CliError::Usage("give --window FILE or --stream".into()))?;
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if !line.trim().is_empty() {
            frames.push(parse_frame(&line, i + 1)?);
        }
    }
    let need = model.config().window_frames;
    if frames.len() < need {
        return Err(CliError::Data(format!(
            "{} has {} frames, a window needs {need}",
            path.display(),
            frames.len()
        )));
    }
    let last = &frames[frames.len() - need..];
    let mut window = Vec::with_capacity(need * model.config().input_dim);
    for f in last {
        flatten_into(f, mask, &mut window);
    }
    let pred = model.forward(&window)?;
    emit(frames.len() - 1, last[need - 1].timestamp_s, pred)
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err)
}

pub fn predict(cfg: &ExperimentConfig, input: &PredictInput) -> Result<(), CliError> {
    for_each_prediction(cfg, input, |end_frame, timestamp_s, pred| {
        print_json(&PredictionRecord {
            end_frame,
            timestamp_s,
            modes: mode_records(&pred),
            decision: None,
        })
    })
}

pub fn decide(
    cfg: &ExperimentConfig,
    ttc_s: f64,
    epsilon: Option<f64>,
    policy: Option<&str>,
    tot: Option<f64>,
    input: Option<&PredictInput>,
) -> Result<(), CliError> {
    let epsilon_s = epsilon.unwrap_or(cfg.decision.epsilon_s);
    let policy = match policy {
        Some(p) => p.parse()?,
        None => cfg.decision.policy,
    };
    if let Some(tot) = tot {
        let d = decide_rule(tot, ttc_s, epsilon_s)?;
        return print_json(&DecisionRecord::new(&d, ttc_s, epsilon_s, None));
    }
    let input = input.ok_or_else(|| CliError::Usage("give --tot or --checkpoint".into()))?;
    for_each_prediction(cfg, input, |end_frame, timestamp_s, pred| {
        let d = decide_mm(&pred, ttc_s, epsilon_s, policy)?;
        print_json(&PredictionRecord {
            end_frame,
            timestamp_s,
            modes: mode_records(&pred),
            decision: Some(DecisionRecord::new(&d, ttc_s, epsilon_s, Some(policy))),
        })
    })
}

//! `tot`: generate data, train, evaluate and run take-over time models.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{report_dir_from_env, ExperimentConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tot",
    version,
    about = "Driver take-over time prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads the configuration.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file; defaults apply to anything it leaves out.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Overrides for commands that train models.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainOverrides {
    /// Event file (JSON lines); defaults to `paths.events`.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Feature groups, e.g. `F+G+H+S+O` or `all`.
    #[arg(long)]
    pub mask: Option<String>,
    /// baseline_lstm, independent_lstms, baseline_lstm_mm or independent_lstms_mm.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub modes: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the resolved configuration.
    Config {
        #[command(flatten)]
        common: Common,
        /// Print the full configuration, defaults included, as TOML.
        #[arg(long)]
        dump: bool,
    },
    /// Generate a synthetic event file and print per-activity statistics.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output file; defaults to `paths.events`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Events per activity instead of the configured counts.
        #[arg(long, conflicts_with = "total")]
        per_activity: Option<usize>,
        /// Total events, split across activities in the study's proportions.
        #[arg(long)]
        total: Option<usize>,
    },
    /// Train a take-over time model and save its checkpoint and history.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Add the shifted-request windows to the training split.
        #[arg(long, conflicts_with = "no_augment")]
        augment: bool,
        /// Train on raw windows only.
        #[arg(long)]
        no_augment: bool,
        /// Start from the trunk of a readiness checkpoint.
        #[arg(long, value_name = "CHECKPOINT")]
        from_ori: Option<PathBuf>,
        /// Checkpoint path; defaults to `paths.checkpoint`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretrain a readiness-index model on synthetic rated windows.
    PretrainOri {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Checkpoint path; defaults to `paths.ori_checkpoint`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on an event file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        mask: Option<String>,
        /// Score the mode closest to the target instead of the most probable one.
        #[arg(long)]
        best_of_k: bool,
        /// Which events to score: all, train, val or test.
        #[arg(long, default_value = "all")]
        split: String,
        /// Also write the report row to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per feature mask and write the ablation report.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Train on growing fractions of the training split and write the report.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Comma-separated fractions in (0, 1].
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Predict take-over times for one window or a frame stream.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: PredictInput,
    },
    /// Decide between handing over and a safe stop.
    Decide {
        #[command(flatten)]
        common: Common,
        /// Time to collision, seconds.
        #[arg(long)]
        ttc: f64,
        /// Safety margin, seconds; defaults to `decision.epsilon_s`.
        #[arg(long)]
        epsilon: Option<f64>,
        /// most_probable, expected or worst_mode.
        #[arg(long)]
        policy: Option<String>,
        /// Use this take-over time instead of a model prediction.
        #[arg(long, conflicts_with_all = ["checkpoint", "window", "stream"])]
        tot: Option<f64>,
        #[command(flatten)]
        input: OptionalPredictInput,
    },
}

#[derive(Debug, Args, Clone)]
pub struct PredictInput {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub mask: Option<String>,
    /// Frame file (JSON lines of `{"t", "x"}`); its last window is scored.
    #[arg(long, conflicts_with = "stream", required_unless_present = "stream")]
    pub window: Option<PathBuf>,
    /// Read frames from standard input, one prediction per window position.
    #[arg(long)]
    pub stream: bool,
    /// Frames between streamed predictions; defaults to `decision.stride_frames`.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct OptionalPredictInput {
    #[arg(long, required_unless_present = "tot")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long, conflicts_with = "stream", required_unless_present_any = ["stream", "tot"])]
    pub window: Option<PathBuf>,
    #[arg(long)]
    pub stream: bool,
    #[arg(long)]
    pub stride: Option<usize>,
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(common.config.as_deref())?.resolve(common.seed, report_dir_from_env())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Config { common, dump } => commands::config(&load(&common)?, dump),
        Command::GenData {
            common,
            out,
            per_activity,
            total,
        } => commands::gen_data(load(&common)?, out, per_activity, total),
        Command::Train {
            common,
            overrides,
            augment,
            no_augment,
            from_ori,
            out,
        } => {
            let augment = match (augment, no_augment) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            commands::train(load(&common)?, &overrides, augment, from_ori, out)
        }
        Command::PretrainOri {
            common,
            overrides,
            out,
        } => commands::pretrain_ori(load(&common)?, &overrides, out),
        Command::Eval {
            common,
            checkpoint,
            events,
            mask,
            best_of_k,
            split,
            out,
        } => commands::eval(
            load(&common)?,
            &checkpoint,
            events,
            mask,
            best_of_k,
            &split,
            out,
        ),
        Command::Ablate { common, overrides } => commands::ablate(load(&common)?, &overrides),
        Command::Sweep {
            common,
            overrides,
            fractions,
        } => commands::sweep(load(&common)?, &overrides, fractions),
        Command::Predict { common, input } => commands::predict(&load(&common)?, &input),
        Command::Decide {
            common,
            ttc,
            epsilon,
            policy,
            tot,
            input,
        } => {
            let cfg = load(&common)?;
            let input = match (tot, input.checkpoint) {
                (Some(_), _) => None,
                (None, Some(checkpoint)) => Some(PredictInput {
                    checkpoint,
                    mask: input.mask,
                    window: input.window,
                    stream: input.stream,
                    stride: input.stride,
                }),
                (None, None) => {
                    return Err(CliError::Usage("give --tot or --checkpoint".into()));
                }
            };
            commands::decide(&cfg, ttc, epsilon, policy.as_deref(), tot, input.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tot: {e}");
            e.exit_code()
        }
    }
}

//! `procnets` subcommands. Exit codes: 0 success, 1 runtime failure, 2 usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use super::{
    dataset_stats, evaluate, evaluate_predictions, infer, permutation_experiment, to_predictions, train, Checkpoint,
    EpochLog, Method, RunConfig,
};
use crate::dataio::{Dataset, PredictionFile, Split, SynthConfig, SynthCorpus};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LAST_CHECKPOINT_FILE: &str = "last_checkpoint.json";
pub const LOG_FILE: &str = "train.log";
pub const PREDICTIONS_FILE: &str = "predictions.json";

#[derive(Debug, Parser)]
#[command(name = "procnets", version, about = "Procedure segmentation of untrimmed videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ablate {
    #[value(name = "proposal_vec")]
    ProposalVec,
    #[value(name = "location_emb")]
    LocationEmb,
    #[value(name = "segment_content")]
    SegmentContent,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (annotations.json + features/*.psf).
    GenData {
        /// Synthetic corpus config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on the train split, selecting by validation Jaccard.
    Train {
        /// Run config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        ablate: Vec<Ablate>,
    },
    /// Write decoder predictions for one split.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
    },
    /// Evaluate a method on one split.
    Eval {
        #[arg(long, default_value = "procnets-lstm")]
        method: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Score a prediction file instead of running a model.
        #[arg(long, conflicts_with = "checkpoint")]
        predictions: Option<PathBuf>,
        /// Run config for the uniform baseline; ignored with a checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long, value_enum)]
        ablate: Vec<Ablate>,
    },
    /// Evaluate on a split and on its half-swapped copy.
    PermuteEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
    },
    /// Segment count and duration statistics per split.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct GenDataReport<'a> {
    config: &'a SynthConfig,
    num_samples: usize,
    out: String,
}

#[derive(Debug, Serialize)]
struct TrainReport<'a> {
    config: &'a RunConfig,
    best_epoch: usize,
    log: &'a [EpochLog],
}

fn apply_ablations(cfg: &mut RunConfig, flags: &[Ablate]) {
    for f in flags {
        match f {
            Ablate::ProposalVec => cfg.ablation.drop_proposal_vec = true,
            Ablate::LocationEmb => cfg.ablation.drop_location_emb = true,
            Ablate::SegmentContent => cfg.ablation.drop_segment_content = true,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn emit<S: Serialize>(value: &S, out: Option<&Path>, file: &str, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let path = dir.join(file);
        fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))?;
    }
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn load_checkpoint(path: &Path, beam: Option<usize>) -> Result<Checkpoint> {
    let mut ckpt = Checkpoint::load(path)?;
    if let Some(b) = beam {
        ckpt.config.beam_size = b;
    }
    ckpt.config.validate()?;
    Ok(ckpt)
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenData { config, out, seed } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str::<SynthConfig>(&text)?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let samples = SynthCorpus::generate(cfg.clone())?.samples()?;
            let n = samples.len();
            Dataset::new(samples).save(&out)?;
            info!("wrote {n} videos to {}", out.display());
            let report = GenDataReport {
                config: &cfg,
                num_samples: n,
                out: out.display().to_string(),
            };
            emit(&report, Some(&out), REPORT_FILE, stdout)
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            ablate,
        } => {
            let mut cfg = run_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            apply_ablations(&mut cfg, &ablate);
            cfg.validate()?;
            let dataset = Dataset::load(&data)?;
            ensure_dir(&out)?;
            cfg.save(&out.join(CONFIG_FILE))?;
            let outcome = train(&cfg, &dataset)?;
            let log_text: String = outcome.log.iter().map(|l| format!("{l}\n")).collect();
            let log_path = out.join(LOG_FILE);
            fs::write(&log_path, log_text).map_err(|e| Error::io(&log_path, e))?;
            outcome.best.save(&out.join(CHECKPOINT_FILE))?;
            outcome.last.save(&out.join(LAST_CHECKPOINT_FILE))?;
            let report = TrainReport {
                config: &cfg,
                best_epoch: outcome.best.epoch,
                log: &outcome.log,
            };
            emit(&report, Some(&out), REPORT_FILE, stdout)
        }
        Command::Infer {
            checkpoint,
            data,
            split,
            out,
            beam,
        } => {
            let split: Split = split.parse()?;
            let ckpt = load_checkpoint(&checkpoint, beam)?;
            let dataset = Dataset::load(&data)?;
            let mut file = PredictionFile::default();
            for s in dataset.split(split) {
                let emissions = infer(&ckpt.model, &ckpt.config, s)?;
                file.videos.push(to_predictions(&s.video.id, &emissions));
            }
            file.videos.sort_by(|a, b| a.id.cmp(&b.id));
            emit(&file, out.as_deref(), PREDICTIONS_FILE, stdout)
        }
        Command::Eval {
            method,
            data,
            split,
            checkpoint,
            predictions,
            config,
            out,
            beam,
            ablate,
        } => {
            let method: Method = method.parse()?;
            let split: Split = split.parse()?;
            let dataset = Dataset::load(&data)?;
            let samples = dataset.split(split);
            let report: EvalReport = if let Some(p) = predictions {
                let cfg = run_config(config.as_deref())?;
                let file = PredictionFile::load(&p)?;
                evaluate_predictions(&file.videos, &cfg, &samples, method.name(), split.as_str())?
            } else if let Some(c) = checkpoint {
                let mut ckpt = load_checkpoint(&c, beam)?;
                apply_ablations(&mut ckpt.config, &ablate);
                ckpt.model.config.ablation = ckpt.config.ablation;
                ckpt.model.decoder.ablation = ckpt.config.ablation;
                evaluate(method, Some(&ckpt.model), &ckpt.config, &samples, split.as_str())?
            } else {
                let cfg = run_config(config.as_deref())?;
                evaluate(method, None, &cfg, &samples, split.as_str())?
            };
            emit(&report, out.as_deref(), REPORT_FILE, stdout)
        }
        Command::PermuteEval {
            checkpoint,
            data,
            split,
            out,
            beam,
        } => {
            let split: Split = split.parse()?;
            let ckpt = load_checkpoint(&checkpoint, beam)?;
            let dataset = Dataset::load(&data)?;
            let report = permutation_experiment(&ckpt.model, &ckpt.config, &dataset.split(split), split.as_str())?;
            emit(&report, out.as_deref(), REPORT_FILE, stdout)
        }
        Command::Stats { data, out } => {
            let dataset = Dataset::load(&data)?;
            emit(&dataset_stats(&dataset), out.as_deref(), REPORT_FILE, stdout)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `stdout`, errors to stderr.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock())
}

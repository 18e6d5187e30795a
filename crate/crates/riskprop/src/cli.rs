//! Command-line front end: `gen`, `train`, `eval`, `curves`, `ablate`.
//!
//! Every command writes exactly one `manifest.json` into its output
//! directory recording the seed, the effective config, a hash of the
//! dataset it consumed, and the code version, so any run can be reproduced
//! or refused when inputs drifted. All randomness flows from `--seed`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::domain::{FrameSequence, LabelStrategy, RiskCurve};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::plot::{self, Series};
use crate::scorer::{ScorerKind, ScorerState};
use crate::seeding;
use crate::synthgen::{self, GenConfig, RampShape};
use crate::trainer::{self, TrainConfig};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const THREADS_ENV: &str = "RISKPROP_THREADS";

#[derive(Parser)]
#[command(name = "riskprop", version, about = "Self-supervised risk propagation testbed")]
struct Cli {
    /// Master seed; every random choice in a run derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file for the subcommand; explicit flags override fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test dataset with ground-truth hazard.
    Gen(GenArgs),
    /// Train a scorer, writing a checkpoint and per-epoch log.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the FAR-constrained protocol.
    Eval(EvalArgs),
    /// Export per-video risk curves as CSV and SVG plots.
    Curves(CurvesArgs),
    /// Run the 4 x 3 loss/labeling ablation grid on one dataset.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RampArg {
    Linear,
    Sigmoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelingArg {
    /// Two anchors: start frame negative, collision frame positive.
    Collision,
    /// Dense labels over a fixed pre-collision window.
    Interval,
    /// Dense labels from the annotated anomaly onset.
    Onset,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerArg {
    Linear,
    Mlp,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    accidents: Option<usize>,
    #[arg(long)]
    safe: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    signal_dims: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    onset_min: Option<f64>,
    #[arg(long)]
    onset_max: Option<f64>,
    #[arg(long, value_enum)]
    ramp: Option<RampArg>,
    /// Fraction of safe videos with a distractor bump (0 disables).
    #[arg(long)]
    distractors: Option<f64>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (train.jsonl / test.jsonl) or a single JSONL file.
    #[arg(long)]
    data: PathBuf,
    /// Validation set for the per-epoch log; defaults to the dataset
    /// directory's test split when present.
    #[arg(long)]
    val_file: Option<PathBuf>,
    /// Skip per-epoch validation scoring.
    #[arg(long)]
    no_val: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    /// Observation window O (frames per snippet).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
    /// Positive-window length in seconds for interval labeling.
    #[arg(long)]
    interval_seconds: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    w_pos: Option<f64>,
    #[arg(long)]
    w_neg: Option<f64>,
    /// Frame pairs sampled per accident video per step.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    d_min: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    /// Disable the future-frame regularization term.
    #[arg(long)]
    no_ffr: bool,
    /// Disable the adaptive monotonic constraint term.
    #[arg(long)]
    no_amc: bool,
    #[arg(long, value_enum)]
    scorer: Option<ScorerArg>,
    /// Hidden width when the scorer is an MLP.
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory (test.jsonl is scored) or a single JSONL file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Evaluate even if the dataset hash differs from the checkpoint's
    /// manifest.
    #[arg(long)]
    force: bool,
    /// Observation window; normally read from the checkpoint manifest.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Alert threshold drawn on the plots.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Cap on per-video files (0 means all).
    #[arg(long, default_value_t = 0)]
    limit: usize,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset directory with train.jsonl and test.jsonl.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    interval_seconds: Option<f64>,
    #[arg(long, value_enum)]
    scorer: Option<ScorerArg>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
}

/// One manifest per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub code_version: String,
    pub dataset_hash: String,
    pub out_dir: String,
    pub config: serde_json::Value,
}

/// Parse and dispatch. `args` must include the program name.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err)
            if err.kind() == ErrorKind::DisplayHelp
                || err.kind() == ErrorKind::DisplayVersion =>
        {
            let _ = err.print();
            return Ok(());
        }
        Err(err) => {
            let _ = err.print();
            return Err(Error::Usage);
        }
    };
    let seed = cli.seed;
    let config = cli.config.clone();
    let out = cli.out.clone();
    match &cli.command {
        Command::Gen(args) => cmd_gen(args, seed, config.as_deref(), &out),
        Command::Train(args) => cmd_train(args, seed, config.as_deref(), &out),
        Command::Eval(args) => cmd_eval(args, seed, &out),
        Command::Curves(args) => cmd_curves(args, seed, &out),
        Command::Ablate(args) => cmd_ablate(args, seed, config.as_deref(), &out),
    }
}

// ---------------------------------------------------------------------------
// gen

fn cmd_gen(args: &GenArgs, seed: Option<u64>, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut cfg: GenConfig = load_config(config)?.unwrap_or_default();
    set(&mut cfg.num_accident, args.accidents);
    set(&mut cfg.num_safe, args.safe);
    set(&mut cfg.frames_per_video, args.frames);
    set(&mut cfg.feature_dim, args.feature_dim);
    set(&mut cfg.signal_dims, args.signal_dims);
    set(&mut cfg.noise_sigma, args.noise_sigma);
    set(&mut cfg.onset_fraction_range.0, args.onset_min);
    set(&mut cfg.onset_fraction_range.1, args.onset_max);
    if let Some(ramp) = args.ramp {
        cfg.ramp_shape = match ramp {
            RampArg::Linear => RampShape::Linear,
            RampArg::Sigmoid => RampShape::Sigmoid,
        };
    }
    set(&mut cfg.distractor_fraction, args.distractors);
    set(&mut cfg.fps, args.fps);
    set(&mut cfg.train_fraction, args.train_fraction);
    set(&mut cfg.seed, seed);

    let (train, test) = synthgen::generate_split(&cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let train_path = out.join(TRAIN_FILE);
    let test_path = out.join(TEST_FILE);
    synthgen::write_dataset(&train, &train_path)?;
    synthgen::write_dataset(&test, &test_path)?;
    let dataset_hash = hash_dataset_source(out)?;
    write_manifest(out, &RunManifest {
        command: "gen".into(),
        seed: cfg.seed,
        code_version: code_version(),
        dataset_hash,
        out_dir: out.display().to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
    })?;
    println!(
        "wrote {} train + {} test sequences to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn apply_train_overrides(cfg: &mut TrainConfig, args: &TrainArgs, seed: Option<u64>) {
    set(&mut cfg.epochs, args.epochs);
    set(&mut cfg.batch_size, args.batch_size);
    set(&mut cfg.lr0, args.lr0);
    set(&mut cfg.window, args.window);
    if let Some(labeling) = args.labeling {
        cfg.labeling = labeling_strategy(labeling, args.interval_seconds, &cfg.labeling);
    } else if let Some(seconds) = args.interval_seconds {
        if let LabelStrategy::FixedInterval(_) = cfg.labeling {
            cfg.labeling = LabelStrategy::FixedInterval(seconds);
        }
    }
    set(&mut cfg.lambda1, args.lambda1);
    set(&mut cfg.lambda2, args.lambda2);
    set(&mut cfg.delta0, args.delta0);
    set(&mut cfg.w_pos, args.w_pos);
    set(&mut cfg.w_neg, args.w_neg);
    set(&mut cfg.sampler.pairs_per_sequence, args.pairs);
    set(&mut cfg.sampler.d_min, args.d_min);
    set(&mut cfg.sampler.d_max, args.d_max);
    if args.no_ffr {
        cfg.ffr_enabled = false;
    }
    if args.no_amc {
        cfg.amc_enabled = false;
    }
    if let Some(scorer) = args.scorer {
        cfg.scorer = scorer_kind(scorer, args.hidden, cfg.scorer);
    } else if let (Some(hidden), ScorerKind::Mlp(_)) = (args.hidden, cfg.scorer) {
        cfg.scorer = ScorerKind::Mlp(hidden);
    }
    set(&mut cfg.seed, seed);
    cfg.sampler.seed = seeding::derive_seed(cfg.seed, 0x7370);
}

fn labeling_strategy(
    arg: LabelingArg,
    seconds: Option<f64>,
    current: &LabelStrategy,
) -> LabelStrategy {
    match arg {
        LabelingArg::Collision => LabelStrategy::OnlyCollision,
        LabelingArg::Onset => LabelStrategy::AnomalyOnset,
        LabelingArg::Interval => {
            let default_seconds = match current {
                LabelStrategy::FixedInterval(s) => *s,
                _ => 2.0,
            };
            LabelStrategy::FixedInterval(seconds.unwrap_or(default_seconds))
        }
    }
}

fn scorer_kind(arg: ScorerArg, hidden: Option<usize>, current: ScorerKind) -> ScorerKind {
    match arg {
        ScorerArg::Linear => ScorerKind::Linear,
        ScorerArg::Mlp => {
            let default_hidden = match current {
                ScorerKind::Mlp(h) => h,
                ScorerKind::Linear => 16,
            };
            ScorerKind::Mlp(hidden.unwrap_or(default_hidden))
        }
    }
}

fn cmd_train(args: &TrainArgs, seed: Option<u64>, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut cfg: TrainConfig = load_config(config)?.unwrap_or_default();
    apply_train_overrides(&mut cfg, args, seed);

    let (train_path, default_val) = resolve_train_paths(&args.data)?;
    let train_set = synthgen::read_dataset(&train_path)?;
    let val_set = if args.no_val {
        None
    } else if let Some(path) = &args.val_file {
        Some(synthgen::read_dataset(path)?)
    } else {
        match default_val {
            Some(path) if path.exists() => Some(synthgen::read_dataset(&path)?),
            _ => None,
        }
    };

    let dataset_hash = hash_dataset_source(&args.data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let outcome = trainer::train(&train_set, val_set.as_deref(), &cfg);
    let (state, log) = match outcome {
        Ok(pair) => pair,
        Err(Error::NonFiniteLoss(dump)) => {
            let dump_path = out.join("nan_dump.json");
            let _ = fs::write(
                &dump_path,
                serde_json::to_string_pretty(&dump).expect("dump serializes"),
            );
            return Err(Error::NonFiniteLoss(dump));
        }
        Err(other) => return Err(other),
    };

    state.save(&out.join(CHECKPOINT_FILE))?;
    let csv_path = out.join("train_log.csv");
    fs::write(&csv_path, log.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    write_manifest(out, &RunManifest {
        command: "train".into(),
        seed: cfg.seed,
        code_version: code_version(),
        dataset_hash,
        out_dir: out.display().to_string(),
        config: serde_json::to_value(&cfg).expect("config serializes"),
    })?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} epochs: total loss {:.6}{}",
            log.epochs.len(),
            last.total,
            last.val_mauc
                .map_or(String::new(), |v| format!(", val mAUC^0.1 {v:.4}"))
        );
    }
    Ok(())
}

fn resolve_train_paths(data: &Path) -> Result<(PathBuf, Option<PathBuf>)> {
    if data.is_dir() {
        Ok((data.join(TRAIN_FILE), Some(data.join(TEST_FILE))))
    } else if data.exists() {
        Ok((data.to_path_buf(), None))
    } else {
        Err(Error::io(data, std::io::Error::new(std::io::ErrorKind::NotFound, "no such dataset")))
    }
}

// ---------------------------------------------------------------------------
// eval

struct LoadedCheckpoint {
    state: ScorerState,
    manifest: Option<RunManifest>,
    window: usize,
}

fn load_checkpoint(path: &Path, window_flag: Option<usize>) -> Result<LoadedCheckpoint> {
    let state = ScorerState::load(path)?;
    let manifest_path = path
        .parent()
        .map(|dir| dir.join(MANIFEST_FILE))
        .filter(|p| p.exists());
    let manifest: Option<RunManifest> = match manifest_path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let manifest_window = manifest
        .as_ref()
        .and_then(|m| serde_json::from_value::<TrainConfig>(m.config.clone()).ok())
        .map(|cfg| cfg.window);
    let window = window_flag.or(manifest_window).unwrap_or(5);
    Ok(LoadedCheckpoint { state, manifest, window })
}

fn resolve_eval_file(data: &Path) -> Result<PathBuf> {
    if data.is_dir() {
        Ok(data.join(TEST_FILE))
    } else if data.exists() {
        Ok(data.to_path_buf())
    } else {
        Err(Error::io(data, std::io::Error::new(std::io::ErrorKind::NotFound, "no such dataset")))
    }
}

fn score_all(
    state: &ScorerState,
    seqs: &[FrameSequence],
    window: usize,
) -> Result<Vec<RiskCurve>> {
    seqs.iter()
        .map(|seq| trainer::score_sequence(state, seq, window))
        .collect()
}

fn cmd_eval(args: &EvalArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint, args.window)?;
    let dataset_hash = hash_dataset_source(&args.data)?;
    match &ckpt.manifest {
        Some(manifest) if manifest.dataset_hash != dataset_hash && !args.force => {
            return Err(Error::DatasetHashMismatch {
                expected: manifest.dataset_hash.clone(),
                actual: dataset_hash,
            });
        }
        None if !args.force => {
            return Err(Error::Config(format!(
                "no manifest next to {}; pass --force to evaluate without the dataset guard",
                args.checkpoint.display()
            )));
        }
        _ => {}
    }

    let seed = seed.unwrap_or(0);
    let seqs = synthgen::read_dataset(&resolve_eval_file(&args.data)?)?;
    let curves = score_all(&ckpt.state, &seqs, ckpt.window)?;
    let clip_seed = seeding::derive_seed(seed, 0x6576);
    let mut rng = seeding::rng_for(clip_seed, 0x636c_6970);
    let clip_set = metrics::extract_clips(&curves, &seqs, &mut rng)?;
    if clip_set.skipped_buckets > 0 {
        eprintln!(
            "note: {} positive-clip bucket(s) skipped (videos too short for the interval)",
            clip_set.skipped_buckets
        );
    }
    let report = metrics::report_from_clips(&clip_set.clips, &curves, &seqs, args.lambda)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let report_path = out.join("metrics.json");
    fs::write(&report_path, report.to_json()).map_err(|e| Error::io(&report_path, e))?;
    let clips_path = out.join("clips.csv");
    fs::write(&clips_path, metrics::clips_to_csv(&clip_set.clips))
        .map_err(|e| Error::io(&clips_path, e))?;
    write_manifest(out, &RunManifest {
        command: "eval".into(),
        seed,
        code_version: code_version(),
        dataset_hash,
        out_dir: out.display().to_string(),
        config: serde_json::json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "lambda": args.lambda,
            "window": ckpt.window,
        }),
    })?;
    println!("{}", summarize(&report));
    Ok(())
}

fn summarize(report: &MetricReport) -> String {
    let fmt = |v: Option<f64>| v.map_or("missing".to_string(), |x| format!("{x:.4}"));
    format!(
        "mAUC^{} {} | mAUC {} | mAP {} | mTTA^{} {}",
        report.lambda,
        fmt(report.mauc_l),
        fmt(report.mauc),
        fmt(report.map),
        report.lambda,
        fmt(report.mtta_l),
    )
}

// ---------------------------------------------------------------------------
// curves

fn cmd_curves(args: &CurvesArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint, args.window)?;
    let seqs = synthgen::read_dataset(&resolve_eval_file(&args.data)?)?;
    let curves = score_all(&ckpt.state, &seqs, ckpt.window)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let limit = if args.limit == 0 { seqs.len() } else { args.limit.min(seqs.len()) };
    for (id, (curve, seq)) in curves.iter().zip(&seqs).enumerate().take(limit) {
        let csv_path = out.join(format!("video_{id:04}.csv"));
        fs::write(&csv_path, curve_csv(curve, seq)).map_err(|e| Error::io(&csv_path, e))?;
        let svg_path = out.join(format!("video_{id:04}.svg"));
        fs::write(&svg_path, video_svg(id, curve, seq, args.threshold))
            .map_err(|e| Error::io(&svg_path, e))?;
    }

    let (mean_csv, mean_svg) = mean_curve_outputs(&curves, &seqs, args.threshold);
    let mean_csv_path = out.join("mean_curve.csv");
    fs::write(&mean_csv_path, mean_csv).map_err(|e| Error::io(&mean_csv_path, e))?;
    let mean_svg_path = out.join("mean_curve.svg");
    fs::write(&mean_svg_path, mean_svg).map_err(|e| Error::io(&mean_svg_path, e))?;

    write_manifest(out, &RunManifest {
        command: "curves".into(),
        seed: seed.unwrap_or(0),
        code_version: code_version(),
        dataset_hash: hash_dataset_source(&args.data)?,
        out_dir: out.display().to_string(),
        config: serde_json::json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "threshold": args.threshold,
            "window": ckpt.window,
            "limit": args.limit,
        }),
    })?;
    println!("wrote {limit} per-video curve files + dataset mean to {}", out.display());
    Ok(())
}

fn curve_csv(curve: &RiskCurve, seq: &FrameSequence) -> String {
    let mut out = String::from("frame,z,a,latent_hazard,onset,collision\n");
    for t in 0..curve.len() {
        let hazard = seq
            .latent_hazard
            .as_ref()
            .map_or(String::new(), |h| h[t].to_string());
        let onset = (seq.onset_index == Some(t)) as u8;
        let collision = (seq.collision_index == Some(t)) as u8;
        out.push_str(&format!(
            "{t},{},{},{hazard},{onset},{collision}\n",
            curve.logits[t], curve.scores[t]
        ));
    }
    out
}

fn video_svg(id: usize, curve: &RiskCurve, seq: &FrameSequence, threshold: f64) -> String {
    let mut series = vec![Series::new(
        "risk",
        "#d62728",
        curve.scores.iter().enumerate().map(|(t, &a)| (t as f64, a)).collect(),
    )];
    if let Some(hazard) = &seq.latent_hazard {
        series.push(Series::new(
            "hazard",
            "#1f77b4",
            hazard.iter().enumerate().map(|(t, &h)| (t as f64, h)).collect(),
        ));
    }
    let last = (curve.len() - 1) as f64;
    series.push(Series::dashed(
        "alert threshold",
        "#7f7f7f",
        vec![(0.0, threshold), (last, threshold)],
    ));
    let kind = if seq.is_accident { "accident" } else { "safe" };
    plot::line_chart(&format!("video {id:04} ({kind})"), "frame", "risk score", &series)
}

/// Frame-aligned mean risk over accident videos, x = frames until collision
/// (non-positive), averaged over the videos that reach each offset.
fn collision_aligned_mean(curves: &[RiskCurve], seqs: &[FrameSequence]) -> Vec<(i64, f64, usize)> {
    let mut sums: std::collections::BTreeMap<i64, (f64, usize)> = std::collections::BTreeMap::new();
    for (curve, seq) in curves.iter().zip(seqs) {
        let Some(collision) = seq.collision_index else { continue };
        for t in 0..curve.len() {
            let offset = t as i64 - collision as i64;
            let entry = sums.entry(offset).or_insert((0.0, 0));
            entry.0 += curve.scores[t];
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(offset, (sum, count))| (offset, sum / count as f64, count))
        .collect()
}

fn mean_curve_outputs(
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    threshold: f64,
) -> (String, String) {
    let mean = collision_aligned_mean(curves, seqs);
    let mut csv = String::from("offset_frames,mean_score,videos\n");
    for &(offset, score, count) in &mean {
        csv.push_str(&format!("{offset},{score},{count}\n"));
    }
    let mut series = vec![Series::new(
        "mean risk (accident videos)",
        "#d62728",
        mean.iter().map(|&(o, s, _)| (o as f64, s)).collect(),
    )];
    if let (Some(first), Some(last)) = (mean.first(), mean.last()) {
        series.push(Series::dashed(
            "alert threshold",
            "#7f7f7f",
            vec![(first.0 as f64, threshold), (last.0 as f64, threshold)],
        ));
    }
    let svg = plot::line_chart(
        "dataset mean risk aligned to collision",
        "frames until collision",
        "risk score",
        &series,
    );
    (csv, svg)
}

// ---------------------------------------------------------------------------
// ablate

/// One cell of the ablation grid.
#[derive(Debug, Clone)]
pub struct CellResult {
    /// 1-based experiment index: 1 = neither loss, 2 = AMC only,
    /// 3 = FFR only, 4 = both.
    pub exp: usize,
    pub labeling: LabelStrategy,
    pub ffr: bool,
    pub amc: bool,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

pub fn labeling_name(strategy: &LabelStrategy) -> &'static str {
    match strategy {
        LabelStrategy::OnlyCollision => "collision",
        LabelStrategy::FixedInterval(_) => "interval",
        LabelStrategy::AnomalyOnset => "onset",
    }
}

const EXP_FLAGS: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

/// Run the 12-cell grid: experiment I-IV (FFR/AMC off/on) crossed with the
/// three labeling strategies, sharing one dataset, seed, and negative-clip
/// sample so differences are attributable to the losses and labels alone.
/// Cell failures are recorded and do not stop the grid.
pub fn run_ablation(
    train_set: &[FrameSequence],
    test_set: &[FrameSequence],
    base: &TrainConfig,
    lambda: f64,
    interval_seconds: f64,
    threads: usize,
) -> Vec<CellResult> {
    let labelings = [
        LabelStrategy::AnomalyOnset,
        LabelStrategy::FixedInterval(interval_seconds),
        LabelStrategy::OnlyCollision,
    ];
    let mut cells: Vec<(usize, LabelStrategy, bool, bool)> = Vec::new();
    for (idx, &(ffr, amc)) in EXP_FLAGS.iter().enumerate() {
        for labeling in labelings {
            cells.push((idx + 1, labeling, ffr, amc));
        }
    }

    let clip_seed = seeding::derive_seed(base.seed, 0x6576);
    let results: Vec<Mutex<Option<CellResult>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, cells.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= cells.len() {
                    break;
                }
                let (exp, labeling, ffr, amc) = cells[idx];
                let cfg = TrainConfig {
                    labeling,
                    ffr_enabled: ffr,
                    amc_enabled: amc,
                    ..base.clone()
                };
                let outcome = trainer::train(train_set, None, &cfg).and_then(|(state, _)| {
                    let curves = score_all(&state, test_set, cfg.window)?;
                    metrics::evaluate(&curves, test_set, lambda, clip_seed)
                });
                let cell = match outcome {
                    Ok(report) => CellResult {
                        exp,
                        labeling,
                        ffr,
                        amc,
                        report: Some(report),
                        error: None,
                    },
                    Err(err) => CellResult {
                        exp,
                        labeling,
                        ffr,
                        amc,
                        report: None,
                        error: Some(err.to_string()),
                    },
                };
                *results[idx].lock().expect("cell slot") = Some(cell);
            });
        }
    });

    results
        .into_iter()
        .map(|slot| slot.into_inner().expect("cell slot").expect("cell computed"))
        .collect()
}

pub fn ablation_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("exp,labeling,ffr,amc,mauc_l,mauc,map,mtta_l,error\n");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for cell in cells {
        let (mauc_l, mauc, map, mtta_l) = match &cell.report {
            Some(r) => (fmt(r.mauc_l), fmt(r.mauc), fmt(r.map), fmt(r.mtta_l)),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.exp,
            labeling_name(&cell.labeling),
            cell.ffr as u8,
            cell.amc as u8,
            mauc_l,
            mauc,
            map,
            mtta_l,
            cell.error.as_deref().unwrap_or(""),
        ));
    }
    out
}

/// Aligned text table shaped like the familiar ablation layout: one row per
/// experiment, one metric block per labeling strategy.
pub fn ablation_table(cells: &[CellResult], lambda: f64) -> String {
    let labelings = ["onset", "interval", "collision"];
    let mut out = String::new();
    out.push_str(&format!("{:13}", format!("(lambda {lambda})")));
    for name in labelings {
        out.push_str(&format!(" | {:^31}", format!("[{name}]")));
    }
    out.push('\n');
    out.push_str(&format!("{:<4} {:<4} {:<3}", "Exp", "FFR", "AMC"));
    for _ in labelings {
        out.push_str(&format!(
            " | {:>7} {:>7} {:>7} {:>7}",
            "mAUC^l", "mAUC", "mAP", "mTTA^l"
        ));
    }
    out.push('\n');
    for exp in 1..=4 {
        let (ffr, amc) = EXP_FLAGS[exp - 1];
        let mark = |b: bool| if b { "x" } else { "-" };
        out.push_str(&format!("{:<4} {:<4} {:<3}", roman(exp), mark(ffr), mark(amc)));
        for name in labelings {
            let cell = cells
                .iter()
                .find(|c| c.exp == exp && labeling_name(&c.labeling) == name);
            match cell.and_then(|c| c.report.as_ref()) {
                Some(r) => {
                    let fmt = |v: Option<f64>| v.map_or("--".into(), |x| format!("{x:.3}"));
                    out.push_str(&format!(
                        " | {:>7} {:>7} {:>7} {:>7}",
                        fmt(r.mauc_l),
                        fmt(r.mauc),
                        fmt(r.map),
                        fmt(r.mtta_l)
                    ));
                }
                None => {
                    out.push_str(&format!(
                        " | {:>7} {:>7} {:>7} {:>7}",
                        "failed", "--", "--", "--"
                    ));
                }
            }
        }
        out.push('\n');
    }
    out
}

fn roman(exp: usize) -> &'static str {
    ["I", "II", "III", "IV"][exp - 1]
}

fn worker_threads(cells: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(usize::MAX);
    available.min(cap).clamp(1, cells)
}

fn cmd_ablate(args: &AblateArgs, seed: Option<u64>, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut base: TrainConfig = load_config(config)?.unwrap_or_default();
    set(&mut base.epochs, args.epochs);
    set(&mut base.batch_size, args.batch_size);
    set(&mut base.lr0, args.lr0);
    set(&mut base.window, args.window);
    set(&mut base.lambda1, args.lambda1);
    set(&mut base.lambda2, args.lambda2);
    if let Some(scorer) = args.scorer {
        base.scorer = scorer_kind(scorer, args.hidden, base.scorer);
    }
    set(&mut base.seed, seed);
    let interval_seconds = args.interval_seconds.unwrap_or(2.0);

    if !args.data.is_dir() {
        return Err(Error::Config(format!(
            "--data {} must be a dataset directory with {TRAIN_FILE} and {TEST_FILE}",
            args.data.display()
        )));
    }
    let train_set = synthgen::read_dataset(&args.data.join(TRAIN_FILE))?;
    let test_set = synthgen::read_dataset(&args.data.join(TEST_FILE))?;

    let cells = run_ablation(
        &train_set,
        &test_set,
        &base,
        args.lambda,
        interval_seconds,
        worker_threads(12),
    );

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("ablation.csv");
    fs::write(&csv_path, ablation_csv(&cells)).map_err(|e| Error::io(&csv_path, e))?;
    let table = ablation_table(&cells, args.lambda);
    let table_path = out.join("ablation.txt");
    fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    write_manifest(out, &RunManifest {
        command: "ablate".into(),
        seed: base.seed,
        code_version: code_version(),
        dataset_hash: hash_dataset_source(&args.data)?,
        out_dir: out.display().to_string(),
        config: serde_json::to_value(&base).expect("config serializes"),
    })?;
    print!("{table}");
    let failures = cells.iter().filter(|c| c.error.is_some()).count();
    if failures > 0 {
        eprintln!("warning: {failures} ablation cells failed; see {}", csv_path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared helpers

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<Option<T>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let cfg = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Ok(Some(cfg))
        }
    }
}

pub fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// FNV-1a over the raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Hash a dataset source: for a directory, the train then test files; for a
/// single file, its bytes.
pub fn hash_dataset_source(path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    if path.is_dir() {
        for name in [TRAIN_FILE, TEST_FILE] {
            let file = path.join(name);
            if file.exists() {
                bytes.extend(fs::read(&file).map_err(|e| Error::io(&file, e))?);
            }
        }
        if bytes.is_empty() {
            return Err(Error::Config(format!(
                "{} contains neither {TRAIN_FILE} nor {TEST_FILE}",
                path.display()
            )));
        }
    } else if path.exists() {
        bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    } else {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such dataset"),
        ));
    }
    Ok(format!("fnv1a:{:016x}", fnv1a64(&bytes)))
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

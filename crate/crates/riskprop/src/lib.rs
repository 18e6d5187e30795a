//! Collision-anchored self-supervised risk propagation.
//!
//! This crate implements a training objective for early accident
//! anticipation that needs no "anomaly onset" annotation: a hard label on
//! the collision frame, a future-frame regularization loss that uses the
//! detached next-frame prediction as a soft target (propagating risk
//! backward in time), and an adaptive monotonic constraint that keeps
//! predicted risk from decreasing as the collision approaches. Around the
//! objective sit a synthetic sequence testbed with ground-truth hazard, a
//! deterministic trainer with hand-derived gradients, and the
//! false-alarm-rate-constrained evaluation protocol (constrained AUC / AP
//! per pre-collision interval, threshold-swept mean time-to-accident).
//!
//! Start with the runnable programs in `examples/`; each one demonstrates a
//! single capability end to end. The `riskprop` binary wraps the same
//! library functions as `gen`, `train`, `eval`, `curves` and `ablate`
//! subcommands.

#![forbid(unsafe_code)]

pub mod cli;
pub mod domain;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod pair_sampler;
pub mod plot;
pub mod scorer;
pub mod seeding;
pub mod synthgen;
pub mod trainer;

pub use domain::{
    make_snippet, sigmoid, Anchor, FrameSequence, LabelSpec, LabelStrategy, RiskCurve, Snippet,
    DEFAULT_FPS,
};
pub use error::{Error, Result};
pub use losses::{
    adaptive_margin, amc_loss, anchored_bce, chain_to_logits, combine, confidence, ffr_loss,
    LossReport, MarginParams,
};
pub use metrics::{
    average_precision, constrained_auc, evaluate, extract_clips, far, mtta, AlarmRecord,
    EvalClip, MetricReport,
};
pub use pair_sampler::{sample_pairs, SamplerConfig};
pub use scorer::{ScorerKind, ScorerState, Tape};
pub use synthgen::{generate, generate_split, read_dataset, write_dataset, GenConfig, RampShape};
pub use trainer::{
    batch_mean_abar, labeling, learning_rate, score_sequence, train, train_epoch, video_loss,
    TrainConfig, TrainLog,
};

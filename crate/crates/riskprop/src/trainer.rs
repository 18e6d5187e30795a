//! Training loop: causal sliding-window scoring, per-video loss assembly with
//! accident/safe masking, batch-mean risk computation, and plain SGD with
//! step decay.
//!
//! Safe videos receive dense negative BCE over every frame; the future-frame
//! and monotonic terms apply to accident videos only. One SGD step is taken
//! per batch of videos, with the batch gradient averaged over videos.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    make_snippet, Anchor, FrameSequence, LabelSpec, LabelStrategy, RiskCurve,
};
use crate::error::{Error, NanDump, Result};
use crate::losses::{
    anchored_bce, chain_to_logits, combine, ffr_loss, amc_loss, LossReport, MarginParams,
};
use crate::metrics;
use crate::pair_sampler::{sample_pairs, SamplerConfig};
use crate::scorer::{ScorerKind, ScorerState, Tape};
use crate::seeding;

/// Full training configuration. Defaults follow the reference recipe:
/// 50 epochs, batch 64, lr 0.002 decayed to 10% every 20 epochs, observation
/// window 5, lambda1 1.5, lambda2 1.1, delta0 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    /// Number of observed frames per snippet (O).
    pub window: usize,
    pub labeling: LabelStrategy,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta0: f64,
    pub w_pos: f64,
    pub w_neg: f64,
    pub sampler: SamplerConfig,
    pub ffr_enabled: bool,
    pub amc_enabled: bool,
    pub scorer: ScorerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            lr0: 0.002,
            lr_decay_factor: 0.1,
            lr_decay_every: 20,
            window: 5,
            labeling: LabelStrategy::OnlyCollision,
            lambda1: 1.5,
            lambda2: 1.1,
            delta0: 0.01,
            w_pos: 10.0,
            w_neg: 1.0,
            sampler: SamplerConfig::default(),
            ffr_enabled: true,
            amc_enabled: true,
            scorer: ScorerKind::Linear,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn margin_params(&self) -> MarginParams {
        MarginParams { delta0: self.delta0, lambda1: self.lambda1, lambda2: self.lambda2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.window == 0 {
            return Err(Error::Config("epochs, batch_size and window must be >= 1".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::Config("lr0 must be positive".into()));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::Config("lr_decay_every must be >= 1".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.delta0 < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.w_pos < 0.0 || self.w_neg < 0.0 {
            return Err(Error::Config("anchor weights must be non-negative".into()));
        }
        self.sampler.validate()
    }
}

/// One completed epoch: mean per-video loss components, optional validation
/// score, and wall-clock time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_bce: f64,
    pub l_reg: f64,
    pub l_mono: f64,
    pub total: f64,
    pub val_mauc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,l_bce,l_reg,l_mono,total,val_mauc,seconds\n");
        for r in &self.epochs {
            let val = r.val_mauc.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch, r.l_bce, r.l_reg, r.l_mono, r.total, val, r.seconds
            ));
        }
        out
    }
}

/// Learning rate at a zero-based epoch index: `lr0 * factor^(epoch / every)`.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr0 * cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every) as i32)
}

/// Score every frame of a sequence with a causal sliding window.
pub fn score_sequence(state: &ScorerState, seq: &FrameSequence, window: usize) -> Result<RiskCurve> {
    let (curve, _) = score_sequence_with_tapes(state, seq, window)?;
    Ok(curve)
}

fn score_sequence_with_tapes(
    state: &ScorerState,
    seq: &FrameSequence,
    window: usize,
) -> Result<(RiskCurve, Vec<Tape>)> {
    let n = seq.num_frames();
    let mut logits = Vec::with_capacity(n);
    let mut tapes = Vec::with_capacity(n);
    for t in 0..n {
        let snip = make_snippet(seq, t, window)?;
        let (logit, tape) = state.forward(&snip)?;
        logits.push(logit);
        tapes.push(tape);
    }
    Ok((RiskCurve::from_logits(logits, seq.fps), tapes))
}

/// Frame-weighted mean risk score over the accident (positive) videos of a
/// batch. `None` when the batch has no positives, in which case the monotonic
/// constraint is skipped for that batch.
pub fn batch_mean_abar(curves: &[RiskCurve], is_accident: &[bool]) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (curve, &positive) in curves.iter().zip(is_accident) {
        if positive {
            sum += curve.scores.iter().sum::<f64>();
            count += curve.scores.len();
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Build the BCE anchor set for a sequence under the given strategy.
///
/// Safe videos always anchor every frame with label 0 regardless of strategy.
pub fn labeling(
    seq: &FrameSequence,
    strategy: LabelStrategy,
    w_pos: f64,
    w_neg: f64,
) -> Result<LabelSpec> {
    let n = seq.num_frames();
    let anchors = if !seq.is_accident {
        (0..n).map(|t| Anchor { frame: t, label: false, weight: w_neg }).collect()
    } else {
        let collision = seq
            .collision_index
            .ok_or_else(|| Error::InvalidSequence("accident video without collision".into()))?;
        match strategy {
            LabelStrategy::OnlyCollision => vec![
                Anchor { frame: 0, label: false, weight: w_neg },
                Anchor { frame: collision, label: true, weight: w_pos },
            ],
            LabelStrategy::FixedInterval(seconds) => {
                let window_frames = (seconds * seq.fps).round() as usize;
                (0..n)
                    .map(|t| {
                        let positive = t + window_frames > collision;
                        Anchor {
                            frame: t,
                            label: positive,
                            weight: if positive { w_pos } else { w_neg },
                        }
                    })
                    .collect()
            }
            LabelStrategy::AnomalyOnset => {
                let onset = seq.onset_index.ok_or(Error::MissingOnset)?;
                (0..n)
                    .map(|t| {
                        let positive = t >= onset;
                        Anchor {
                            frame: t,
                            label: positive,
                            weight: if positive { w_pos } else { w_neg },
                        }
                    })
                    .collect()
            }
        }
    };
    Ok(LabelSpec { anchors, strategy })
}

/// Assemble the full per-video loss. For accident videos this is anchored BCE
/// plus (when enabled) the future-frame and monotonic terms; for safe videos
/// the auxiliary terms are masked out entirely.
pub fn video_loss(
    seq: &FrameSequence,
    curve: &RiskCurve,
    cfg: &TrainConfig,
    pairs: Option<&[(usize, usize)]>,
    a_bar: Option<f64>,
) -> Result<LossReport> {
    let params = cfg.margin_params();
    let labels = labeling(seq, cfg.labeling, cfg.w_pos, cfg.w_neg)?;
    let bce = anchored_bce(&curve.scores, &labels)?;

    let mut l_reg = 0.0;
    let mut dlogits_reg = vec![0.0; curve.len()];
    let mut l_mono = 0.0;
    let mut dscores_mono = vec![0.0; curve.len()];
    let mut ffr_degenerate = false;

    if seq.is_accident {
        if cfg.ffr_enabled {
            if curve.len() < 2 {
                ffr_degenerate = true;
            } else {
                let (value, grad) = ffr_loss(&curve.logits);
                l_reg = value;
                dlogits_reg = grad;
            }
        }
        if cfg.amc_enabled {
            if let (Some(pairs), Some(a_bar)) = (pairs, a_bar) {
                if !pairs.is_empty() {
                    let (value, grad) = amc_loss(&curve.scores, pairs, a_bar, cfg.delta0)?;
                    l_mono = value;
                    dscores_mono = grad;
                }
            }
        }
    }

    let mut dscores = bce.dscores;
    for (d, m) in dscores.iter_mut().zip(&dscores_mono) {
        *d += params.lambda2 * m;
    }
    let mut dlogits = chain_to_logits(&dscores, &curve.scores);
    for (d, r) in dlogits.iter_mut().zip(&dlogits_reg) {
        *d += params.lambda1 * r;
    }

    let total = combine(bce.value, l_reg, l_mono, &params);
    Ok(LossReport {
        l_bce: bce.value,
        l_reg,
        l_mono,
        total,
        dlogits,
        bce_clamped: bce.clamped,
        ffr_degenerate,
    })
}

/// Mean per-video loss components over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochLosses {
    pub l_bce: f64,
    pub l_reg: f64,
    pub l_mono: f64,
    pub total: f64,
}

/// Run one epoch of shuffled mini-batch SGD over the dataset, mutating the
/// scorer in place.
///
/// The caller's rng drives only the batch shuffle; pair sampling draws from
/// its own per-epoch stream. Toggling the auxiliary losses therefore never
/// changes which videos share a batch, so ablation cells stay comparable and
/// zero loss weights reproduce the disabled-loss trajectory exactly.
pub fn train_epoch(
    state: &mut ScorerState,
    dataset: &[FrameSequence],
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpochLosses> {
    if dataset.is_empty() {
        return Err(Error::Config("empty training dataset".into()));
    }
    let lr = learning_rate(cfg, epoch);
    let mut pair_rng = seeding::rng_for(cfg.seed, 0x7061_0000 ^ epoch as u64);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);

    let mut sums = EpochLosses::default();
    for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let batch_scale = 1.0 / chunk.len() as f64;

        let mut curves = Vec::with_capacity(chunk.len());
        let mut tapes = Vec::with_capacity(chunk.len());
        let mut flags = Vec::with_capacity(chunk.len());
        for &vid in chunk {
            let (curve, tape) = score_sequence_with_tapes(state, &dataset[vid], cfg.window)?;
            curves.push(curve);
            tapes.push(tape);
            flags.push(dataset[vid].is_accident);
        }
        let a_bar = batch_mean_abar(&curves, &flags);

        for (k, &vid) in chunk.iter().enumerate() {
            let seq = &dataset[vid];
            let pairs = if seq.is_accident && cfg.amc_enabled && a_bar.is_some() {
                Some(sample_pairs(seq.num_frames(), &cfg.sampler, &mut pair_rng)?)
            } else {
                None
            };
            let report = video_loss(seq, &curves[k], cfg, pairs.as_deref(), a_bar)?;
            if !report.total.is_finite() {
                return Err(Error::NonFiniteLoss(NanDump {
                    epoch,
                    batch_index,
                    video_indices: chunk.to_vec(),
                    l_bce: report.l_bce,
                    l_reg: report.l_reg,
                    l_mono: report.l_mono,
                }));
            }
            sums.l_bce += report.l_bce;
            sums.l_reg += report.l_reg;
            sums.l_mono += report.l_mono;
            sums.total += report.total;
            for (tape, &dlogit) in tapes[k].iter().zip(&report.dlogits) {
                if dlogit != 0.0 {
                    state.backward(tape, dlogit * batch_scale)?;
                }
            }
        }

        state.sgd_step(lr);
        state.zero_grad();
    }

    let n = dataset.len() as f64;
    Ok(EpochLosses {
        l_bce: sums.l_bce / n,
        l_reg: sums.l_reg / n,
        l_mono: sums.l_mono / n,
        total: sums.total / n,
    })
}

/// Train a fresh scorer on the dataset. When a validation set is supplied,
/// each epoch records the FAR-constrained mean AUC on it (lambda 0.1, clip
/// sampling fixed across epochs).
pub fn train(
    dataset: &[FrameSequence],
    validation: Option<&[FrameSequence]>,
    cfg: &TrainConfig,
) -> Result<(ScorerState, TrainLog)> {
    cfg.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::Config("empty training dataset".into()))?;
    let feature_dim = first.feature_dim();
    for seq in dataset.iter().chain(validation.into_iter().flatten()) {
        seq.validate()?;
        if seq.feature_dim() != feature_dim {
            return Err(Error::Config(format!(
                "inconsistent feature_dim: {} vs {}",
                seq.feature_dim(),
                feature_dim
            )));
        }
    }

    let mut state = ScorerState::init(
        cfg.scorer,
        cfg.window * feature_dim,
        seeding::derive_seed(cfg.seed, 0x1217),
    )?;
    let mut rng = seeding::rng_for(cfg.seed, 0x7261);
    let val_clip_seed = seeding::derive_seed(cfg.seed, 0x7661);

    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let losses = train_epoch(&mut state, dataset, cfg, epoch, &mut rng)?;
        let val_mauc = match validation {
            Some(val) if !val.is_empty() => {
                let curves: Vec<RiskCurve> = val
                    .iter()
                    .map(|seq| score_sequence(&state, seq, cfg.window))
                    .collect::<Result<_>>()?;
                metrics::evaluate(&curves, val, 0.1, val_clip_seed)?.mauc_l
            }
            _ => None,
        };
        log.epochs.push(EpochRecord {
            epoch,
            l_bce: losses.l_bce,
            l_reg: losses.l_reg,
            l_mono: losses.l_mono,
            total: losses.total,
            val_mauc,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((state, log))
}

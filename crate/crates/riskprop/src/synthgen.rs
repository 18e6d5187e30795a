//! Synthetic dashcam-like sequence generator with ground-truth latent hazard.
//!
//! Accident videos carry a hazard signal that is 0 before a random onset and
//! ramps to 1 at the collision (the final stored frame). The hazard is
//! broadcast into the first `signal_dims` feature dimensions and Gaussian
//! noise is added everywhere. Safe videos are pure noise, optionally with a
//! transient distractor bump in one non-signal dimension — a feature
//! excursion that never corresponds to real hazard.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::prelude::*;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{FrameSequence, DEFAULT_FPS};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    /// Hazard rises linearly from onset to collision: the slow, steady
    /// deterioration scenario.
    Linear,
    /// Hazard stays near zero for most of the window and spikes shortly
    /// before the collision: a logistic rescaled to hit 0 at onset and 1 at
    /// collision exactly.
    Sigmoid,
}

/// Steepness and center of the logistic ramp before rescaling. The late
/// center keeps most of the rise inside the final quarter of the
/// onset-to-collision span.
const SIGMOID_RAMP_K: f64 = 10.0;
const SIGMOID_RAMP_CENTER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub num_accident: usize,
    pub num_safe: usize,
    pub frames_per_video: usize,
    pub feature_dim: usize,
    pub signal_dims: usize,
    pub noise_sigma: f64,
    pub onset_fraction_range: (f64, f64),
    pub ramp_shape: RampShape,
    /// Fraction of safe videos given a distractor bump; 0 disables.
    pub distractor_fraction: f64,
    pub fps: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_accident: 200,
            num_safe: 200,
            frames_per_video: 120,
            feature_dim: 8,
            signal_dims: 2,
            noise_sigma: 0.3,
            onset_fraction_range: (0.3, 0.8),
            ramp_shape: RampShape::Sigmoid,
            distractor_fraction: 0.3,
            fps: DEFAULT_FPS,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_accident + self.num_safe == 0 {
            return Err(Error::Config("dataset must contain at least one video".into()));
        }
        if self.frames_per_video < 2 {
            return Err(Error::Config("frames_per_video must be >= 2".into()));
        }
        if self.signal_dims == 0 || self.signal_dims > self.feature_dim {
            return Err(Error::Config(format!(
                "signal_dims {} must lie in 1..={}",
                self.signal_dims, self.feature_dim
            )));
        }
        let (lo, hi) = self.onset_fraction_range;
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(Error::Config("onset_fraction_range must satisfy 0 < lo <= hi < 1".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.distractor_fraction) {
            return Err(Error::Config("distractor_fraction must lie in [0,1]".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0,1)".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        Ok(())
    }
}

/// Hazard value at normalized ramp position `x` in [0,1].
fn ramp(shape: RampShape, x: f64) -> f64 {
    match shape {
        RampShape::Linear => x,
        RampShape::Sigmoid => {
            let s = |v: f64| 1.0 / (1.0 + (-SIGMOID_RAMP_K * (v - SIGMOID_RAMP_CENTER)).exp());
            let (s0, s1) = (s(0.0), s(1.0));
            (s(x) - s0) / (s1 - s0)
        }
    }
}

/// Ground-truth hazard curve for an accident video with the given onset.
pub fn hazard_curve(shape: RampShape, frames: usize, onset: usize) -> Vec<f64> {
    let last = frames - 1;
    (0..frames)
        .map(|t| {
            if t < onset || last == onset {
                if t == last { 1.0 } else { 0.0 }
            } else {
                ramp(shape, (t - onset) as f64 / (last - onset) as f64)
            }
        })
        .collect()
}

/// Generate the full dataset, accident videos first. Each sequence draws from
/// its own derived seed so generation order never matters.
pub fn generate(cfg: &GenConfig) -> Result<Vec<FrameSequence>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.num_accident + cfg.num_safe);
    for i in 0..cfg.num_accident {
        out.push(gen_accident(cfg, seeding::rng_for(cfg.seed, i as u64)));
    }
    for j in 0..cfg.num_safe {
        out.push(gen_safe(cfg, seeding::rng_for(cfg.seed, (cfg.num_accident + j) as u64)));
    }
    debug_assert!(out.iter().all(|s| s.validate().is_ok()));
    Ok(out)
}

/// Generate and split by sequence into (train, test), stratified by class.
pub fn generate_split(cfg: &GenConfig) -> Result<(Vec<FrameSequence>, Vec<FrameSequence>)> {
    let all = generate(cfg)?;
    let mut split_rng = seeding::rng_for(cfg.seed, u64::MAX);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (start, count) in [(0, cfg.num_accident), (cfg.num_accident, cfg.num_safe)] {
        let mut idx: Vec<usize> = (start..start + count).collect();
        idx.shuffle(&mut split_rng);
        let n_train = (count as f64 * cfg.train_fraction).round() as usize;
        let mut chosen_train: Vec<usize> = idx[..n_train].to_vec();
        let mut chosen_test: Vec<usize> = idx[n_train..].to_vec();
        chosen_train.sort_unstable();
        chosen_test.sort_unstable();
        train.extend(chosen_train.into_iter().map(|k| all[k].clone()));
        test.extend(chosen_test.into_iter().map(|k| all[k].clone()));
    }
    Ok((train, test))
}

fn noise(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
    }
}

fn gen_accident(cfg: &GenConfig, mut rng: rand_chacha::ChaCha8Rng) -> FrameSequence {
    let frames = cfg.frames_per_video;
    let last = frames - 1;
    let (lo, hi) = cfg.onset_fraction_range;
    let onset = ((rng.random_range(lo..=hi) * frames as f64).round() as usize).clamp(0, last - 1);
    let hazard = hazard_curve(cfg.ramp_shape, frames, onset);
    let features = hazard
        .iter()
        .map(|&h| {
            (0..cfg.feature_dim)
                .map(|d| {
                    let base = if d < cfg.signal_dims { h } else { 0.0 };
                    base + noise(&mut rng, cfg.noise_sigma)
                })
                .collect()
        })
        .collect();
    FrameSequence {
        features,
        fps: cfg.fps,
        is_accident: true,
        collision_index: Some(last),
        onset_index: Some(onset),
        latent_hazard: Some(hazard),
    }
}

fn gen_safe(cfg: &GenConfig, mut rng: rand_chacha::ChaCha8Rng) -> FrameSequence {
    let frames = cfg.frames_per_video;
    let has_noise_dims = cfg.feature_dim > cfg.signal_dims;
    let distractor = if has_noise_dims && rng.random_bool(cfg.distractor_fraction) {
        let dim = rng.random_range(cfg.signal_dims..cfg.feature_dim);
        let center = rng.random_range(0.0..frames as f64);
        Some((dim, center))
    } else {
        None
    };
    let width = cfg.fps.max(1.0); // roughly a one-second excursion
    let features = (0..frames)
        .map(|t| {
            (0..cfg.feature_dim)
                .map(|d| {
                    let mut v = noise(&mut rng, cfg.noise_sigma);
                    if let Some((bump_dim, center)) = distractor {
                        if d == bump_dim {
                            let dt = (t as f64 - center) / width;
                            v += 2.0 * (-0.5 * dt * dt).exp();
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    FrameSequence {
        features,
        fps: cfg.fps,
        is_accident: false,
        collision_index: None,
        onset_index: None,
        latent_hazard: Some(vec![0.0; frames]),
    }
}

/// Write one JSON object per line.
pub fn write_dataset(seqs: &[FrameSequence], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for seq in seqs {
        let line = serde_json::to_string(seq)
            .map_err(|e| Error::Config(format!("serialize sequence: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a JSONL dataset, validating every sequence. Parse failures carry the
/// 1-based line number.
pub fn read_dataset(path: &Path) -> Result<Vec<FrameSequence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: FrameSequence = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        seq.validate().map_err(|e| Error::Parse {
            path: path.into(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(seq);
    }
    Ok(out)
}

//! Randomized frame-pair sampling for the monotonic constraint.
//!
//! For each pair a normalized offset `d` is drawn uniformly from
//! `[d_min, d_max]`, a start frame uniformly from `[0, floor(T * (1 - d))]`,
//! and the end frame is `t1 + round(d * T)` clamped to the last frame. Pairs
//! sample with replacement; every emitted pair is strictly forward in time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub pairs_per_sequence: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { d_min: 0.1, d_max: 0.9, pairs_per_sequence: 8, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_max < 1.0 && self.d_min <= self.d_max) {
            return Err(Error::Config(format!(
                "offset range ({}, {}) must satisfy 0 < d_min <= d_max < 1",
                self.d_min, self.d_max
            )));
        }
        if self.pairs_per_sequence == 0 {
            return Err(Error::Config("pairs_per_sequence must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draw `cfg.pairs_per_sequence` frame pairs `(i, j)` with `0 <= i < j < num_frames`.
pub fn sample_pairs(
    num_frames: usize,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    if num_frames < 2 || cfg.d_max * (num_frames as f64) < 1.0 {
        return Err(Error::SequenceTooShort);
    }
    let t = num_frames as f64;
    let last = num_frames - 1;
    let mut pairs = Vec::with_capacity(cfg.pairs_per_sequence);
    while pairs.len() < cfg.pairs_per_sequence {
        let d = rng.random_range(cfg.d_min..=cfg.d_max);
        let t1_hi = (t * (1.0 - d)).floor() as usize;
        let t1 = rng.random_range(0..=t1_hi.min(last));
        let t2 = (t1 + (d * t).round() as usize).min(last);
        // rounding on very short sequences can collapse the pair; redraw
        if t2 > t1 {
            pairs.push((t1, t2));
        }
    }
    Ok(pairs)
}

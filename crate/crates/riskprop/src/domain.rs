//! Core data types shared by every other module: frame sequences, snippets,
//! risk curves, and label anchor sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default frame rate of the testbed (frames per second).
pub const DEFAULT_FPS: f64 = 10.0;

/// One video's per-frame feature vectors plus its label anchors.
///
/// `features` stands in for encoded video frames. For accident videos only
/// the pre-collision portion is stored, so `collision_index` is always the
/// last frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub features: Vec<Vec<f64>>,
    pub fps: f64,
    pub is_accident: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_hazard: Option<Vec<f64>>,
}

impl FrameSequence {
    pub fn num_frames(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, |row| row.len())
    }

    /// Check every structural invariant; readers and generators call this
    /// before a sequence enters the pipeline.
    pub fn validate(&self) -> Result<()> {
        if self.num_frames() < 2 {
            return Err(Error::InvalidSequence("fewer than 2 frames".into()));
        }
        let dim = self.feature_dim();
        if dim == 0 {
            return Err(Error::InvalidSequence("feature_dim must be >= 1".into()));
        }
        if self.features.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidSequence("ragged feature rows".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidSequence("fps must be positive".into()));
        }
        match (self.is_accident, self.collision_index) {
            (true, Some(t)) => {
                if t == 0 || t != self.num_frames() - 1 {
                    return Err(Error::InvalidSequence(format!(
                        "collision_index {} must equal the last frame index {}",
                        t,
                        self.num_frames() - 1
                    )));
                }
            }
            (true, None) => {
                return Err(Error::InvalidSequence(
                    "accident video without collision_index".into(),
                ));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidSequence(
                    "non-accident video with collision_index".into(),
                ));
            }
            (false, None) => {}
        }
        if let Some(onset) = self.onset_index {
            let limit = self.collision_index.unwrap_or(self.num_frames() - 1);
            if onset > limit {
                return Err(Error::InvalidSequence(format!(
                    "onset_index {onset} past collision index {limit}"
                )));
            }
        }
        if let Some(hazard) = &self.latent_hazard {
            if hazard.len() != self.num_frames() {
                return Err(Error::InvalidSequence(
                    "latent_hazard length differs from frame count".into(),
                ));
            }
            if hazard.iter().any(|&h| !(0.0..=1.0).contains(&h)) {
                return Err(Error::InvalidSequence(
                    "latent_hazard values outside [0,1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A window of consecutive feature rows ending at frame `t` — the scorer's
/// input unit. Windows that would start before frame 0 repeat row 0.
#[derive(Debug, Clone)]
pub struct Snippet<'a> {
    pub rows: Vec<&'a [f64]>,
    pub t: usize,
}

impl Snippet<'_> {
    pub fn window(&self) -> usize {
        self.rows.len()
    }

    pub fn flat_len(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// Row-major flattening, oldest frame first.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for row in &self.rows {
            out.extend_from_slice(row);
        }
        out
    }
}

/// Extract the window of `window` rows ending at index `t`, left-padding by
/// repeating row 0 when the window would reach before the sequence start.
pub fn make_snippet<'a>(seq: &'a FrameSequence, t: usize, window: usize) -> Result<Snippet<'a>> {
    if window == 0 {
        return Err(Error::Config("snippet window must be >= 1".into()));
    }
    let len = seq.num_frames();
    if t >= len {
        return Err(Error::IndexOutOfRange { index: t, len });
    }
    let mut rows = Vec::with_capacity(window);
    for k in 0..window {
        let offset = window - 1 - k; // frames t-window+1 ..= t
        let idx = t.saturating_sub(offset);
        rows.push(seq.features[idx].as_slice());
    }
    Ok(Snippet { rows, t })
}

/// Numerically safe logistic. Output is kept strictly inside (0,1) so that
/// downstream `log` calls never see an exact 0 or 1 from saturation.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16)
}

/// Per-frame logits and sigmoid risk scores for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub logits: Vec<f64>,
    pub scores: Vec<f64>,
    pub fps: f64,
}

impl RiskCurve {
    pub fn from_logits(logits: Vec<f64>, fps: f64) -> Self {
        let scores = logits.iter().map(|&z| sigmoid(z)).collect();
        RiskCurve { logits, scores, fps }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }
}

/// Which frames of a sequence receive hard BCE labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStrategy {
    /// Two anchors on accident videos: the start frame (negative) and the
    /// collision frame (positive).
    OnlyCollision,
    /// Dense labels: frames within the given number of seconds before the
    /// collision are positive, all earlier frames negative.
    FixedInterval(f64),
    /// Dense labels: frames at or after the annotated anomaly onset are
    /// positive, all earlier frames negative.
    AnomalyOnset,
}

/// A labeled frame: (index, binary label, non-negative weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub frame: usize,
    pub label: bool,
    pub weight: f64,
}

impl Anchor {
    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// The anchor set consumed by the weighted BCE loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpec {
    pub anchors: Vec<Anchor>,
    pub strategy: LabelStrategy,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_with_rows(rows: Vec<Vec<f64>>) -> FrameSequence {
        FrameSequence {
            features: rows,
            fps: DEFAULT_FPS,
            is_accident: false,
            collision_index: None,
            onset_index: None,
            latent_hazard: None,
        }
    }

    fn counting_seq(n: usize) -> FrameSequence {
        seq_with_rows((0..n).map(|i| vec![i as f64]).collect())
    }

    #[test]
    fn snippet_direct_window() {
        let seq = counting_seq(10);
        let s = make_snippet(&seq, 6, 5).unwrap();
        let rows: Vec<f64> = s.flatten();
        assert_eq!(rows, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn snippet_left_padding_repeats_frame_zero() {
        let seq = counting_seq(10);
        let s = make_snippet(&seq, 1, 5).unwrap();
        assert_eq!(s.flatten(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn snippet_identity_case() {
        let seq = counting_seq(10);
        let s = make_snippet(&seq, 0, 1).unwrap();
        assert_eq!(s.flatten(), vec![0.0]);
    }

    #[test]
    fn snippet_out_of_range() {
        let seq = counting_seq(4);
        assert!(matches!(
            make_snippet(&seq, 4, 2),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn snippet_always_full_width() {
        let seq = counting_seq(7);
        for t in 0..7 {
            for window in 1..=9 {
                let s = make_snippet(&seq, t, window).unwrap();
                assert_eq!(s.window(), window);
                assert_eq!(s.flatten().len(), window);
            }
        }
    }

    #[test]
    fn sigmoid_matches_logits_and_stays_open_interval() {
        for &z in &[-900.0, -40.0, -3.0, 0.0, 1.5, 40.0, 900.0] {
            let s = sigmoid(z);
            assert!(s > 0.0 && s < 1.0, "sigmoid({z}) = {s}");
            let direct = 1.0 / (1.0 + (-z).exp());
            assert!((s - direct).abs() < 1e-12);
        }
        let curve = RiskCurve::from_logits(vec![-2.0, 0.0, 2.0], DEFAULT_FPS);
        assert_eq!(curve.scores[1], 0.5);
    }

    #[test]
    fn validate_rejects_bad_sequences() {
        let mut seq = counting_seq(5);
        assert!(seq.validate().is_ok());

        seq.is_accident = true;
        assert!(seq.validate().is_err()); // accident without collision

        seq.collision_index = Some(3);
        assert!(seq.validate().is_err()); // collision not at last frame

        seq.collision_index = Some(4);
        assert!(seq.validate().is_ok());

        seq.onset_index = Some(5);
        assert!(seq.validate().is_err()); // onset past collision

        seq.onset_index = Some(2);
        seq.latent_hazard = Some(vec![0.0; 4]);
        assert!(seq.validate().is_err()); // hazard length mismatch

        seq.latent_hazard = Some(vec![0.0, 0.0, 0.5, 0.9, 1.0]);
        assert!(seq.validate().is_ok());
    }

    #[test]
    fn jsonl_field_names_are_stable() {
        let mut seq = counting_seq(2);
        seq.is_accident = true;
        seq.collision_index = Some(1);
        seq.onset_index = Some(0);
        seq.latent_hazard = Some(vec![0.0, 1.0]);
        let json = serde_json::to_string(&seq).unwrap();
        for key in [
            "\"features\"",
            "\"fps\"",
            "\"is_accident\"",
            "\"collision_index\"",
            "\"onset_index\"",
            "\"latent_hazard\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let safe = counting_seq(2);
        let json = serde_json::to_string(&safe).unwrap();
        assert!(!json.contains("collision_index"));
        let back: FrameSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, safe);
    }
}

//! FAR-constrained evaluation: clip extraction over four pre-collision
//! intervals, false alarm rate, partial (constrained) AUC and AP per
//! interval, mean time-to-accident over FAR-feasible thresholds, and the
//! aggregate report.
//!
//! The constrained AUC is the area under the ROC curve restricted to
//! FPR in [0, lambda], normalized by lambda so that perfect separation
//! scores 1.0. AP is accumulated only over operating points whose false
//! alarm rate stays within lambda.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{FrameSequence, RiskCurve};
use crate::error::{Error, Result};

/// Start times (seconds before collision) of the four positive-clip buckets.
pub const TAU_STARTS: [f64; 4] = [0.0, 0.5, 1.0, 1.5];

/// Buckets whose constrained metrics enter the aggregate means.
pub const AGGREGATE_BUCKETS: [usize; 3] = [1, 2, 3];

pub fn bucket_label(bucket: usize) -> &'static str {
    ["0.0", "0.5", "1.0", "1.5"][bucket]
}

/// Decision frame offset before the collision: the bucket midpoint
/// `tau + 0.25 s` converted to frames.
pub fn decision_offset(bucket: usize, fps: f64) -> usize {
    ((TAU_STARTS[bucket] + 0.25) * fps).round() as usize
}

/// One evaluation clip: the model score at a decision frame, with the
/// originating bucket for positives (negatives carry no bucket).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalClip {
    pub video_id: usize,
    pub score: f64,
    pub label: bool,
    pub bucket: Option<usize>,
    pub decision_frame: usize,
}

/// Clip extraction output; buckets a video was too short for are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSet {
    pub clips: Vec<EvalClip>,
    pub skipped_buckets: usize,
}

/// Extract one positive clip per accident video per bucket (score taken at
/// the bucket's decision frame) plus an equal number of negative clips drawn
/// uniformly, with replacement, from all safe-video frames.
pub fn extract_clips(
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    rng: &mut impl Rng,
) -> Result<ClipSet> {
    if curves.len() != seqs.len() {
        return Err(Error::Config(format!(
            "{} curves for {} sequences",
            curves.len(),
            seqs.len()
        )));
    }
    let mut clips = Vec::new();
    let mut skipped = 0usize;
    for (id, (curve, seq)) in curves.iter().zip(seqs).enumerate() {
        if !seq.is_accident {
            continue;
        }
        let collision = seq
            .collision_index
            .ok_or_else(|| Error::InvalidSequence("accident video without collision".into()))?;
        for bucket in 0..TAU_STARTS.len() {
            let offset = decision_offset(bucket, seq.fps);
            if offset > collision {
                skipped += 1;
                continue;
            }
            let frame = collision - offset;
            clips.push(EvalClip {
                video_id: id,
                score: curve.scores[frame],
                label: true,
                bucket: Some(bucket),
                decision_frame: frame,
            });
        }
    }

    let positives = clips.len();
    let mut safe_pool = Vec::new();
    for (id, (curve, seq)) in curves.iter().zip(seqs).enumerate() {
        if !seq.is_accident {
            for frame in 0..curve.len() {
                safe_pool.push((id, frame));
            }
        }
    }
    if positives > 0 && safe_pool.is_empty() {
        return Err(Error::Config(
            "no safe-video frames to sample negative clips from".into(),
        ));
    }
    for _ in 0..positives {
        let (id, frame) = safe_pool[rng.random_range(0..safe_pool.len())];
        clips.push(EvalClip {
            video_id: id,
            score: curves[id].scores[frame],
            label: false,
            bucket: None,
            decision_frame: frame,
        });
    }
    Ok(ClipSet { clips, skipped_buckets: skipped })
}

/// Fraction of negative clips scoring at or above the threshold.
pub fn far(scores_neg: &[f64], theta: f64) -> Result<f64> {
    if scores_neg.is_empty() {
        return Err(Error::NoNegatives);
    }
    let hits = scores_neg.iter().filter(|&&s| s >= theta).count();
    Ok(hits as f64 / scores_neg.len() as f64)
}

/// ROC operating points (FPR, TPR) from (0,0) to (1,1), sweeping the
/// threshold down over distinct scores; tied scores form one point.
fn roc_points(pos: &[f64], neg: &[f64]) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let p = pos.len() as f64;
    let n = neg.len() as f64;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((fp / n, tp / p));
    }
    points
}

/// Trapezoidal area under a piecewise-linear ROC for FPR in [0, lambda].
fn partial_area(points: &[(f64, f64)], lambda: f64) -> f64 {
    let mut area = 0.0;
    let (mut x0, mut y0) = points[0];
    for &(x1, y1) in &points[1..] {
        if x1 <= lambda {
            area += (x1 - x0) * (y0 + y1) / 2.0;
            (x0, y0) = (x1, y1);
        } else {
            if x0 < lambda {
                let t = (lambda - x0) / (x1 - x0);
                let y_at = y0 + t * (y1 - y0);
                area += (lambda - x0) * (y0 + y_at) / 2.0;
            }
            break;
        }
    }
    area
}

/// Partial AUC over FPR in [0, lambda], normalized by lambda. `None` when a
/// class is empty or lambda is outside (0, 1].
pub fn constrained_auc(pos: &[f64], neg: &[f64], lambda: f64) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() || !(lambda > 0.0 && lambda <= 1.0) {
        return None;
    }
    Some(partial_area(&roc_points(pos, neg), lambda) / lambda)
}

/// Average precision over descending-score operating points (ties grouped),
/// accumulated only while the false alarm rate stays within lambda.
pub fn average_precision(pos: &[f64], neg: &[f64], lambda: f64) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() || !(lambda > 0.0 && lambda <= 1.0) {
        return None;
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let p = pos.len() as f64;
    let n = neg.len() as f64;
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut recall_prev = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        if fp / n > lambda {
            break;
        }
        let recall = tp / p;
        ap += (recall - recall_prev) * (tp / (tp + fp));
        recall_prev = recall;
    }
    Some(ap)
}

/// First alarm of each accident video at a threshold. Only frames at or
/// after the anomaly onset can raise an alarm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmRecord {
    pub video_id: usize,
    pub alarm_frame: Option<usize>,
    pub collision_frame: usize,
    pub onset_frame: usize,
}

pub fn alarm_records(
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    theta: f64,
) -> Result<Vec<AlarmRecord>> {
    let mut out = Vec::new();
    for (id, (curve, seq)) in curves.iter().zip(seqs).enumerate() {
        if !seq.is_accident {
            continue;
        }
        let collision = seq
            .collision_index
            .ok_or_else(|| Error::InvalidSequence("accident video without collision".into()))?;
        let onset = seq.onset_index.ok_or(Error::MissingOnset)?;
        let alarm_frame = (onset..=collision).find(|&t| curve.scores[t] >= theta);
        out.push(AlarmRecord { video_id: id, alarm_frame, collision_frame: collision, onset_frame: onset });
    }
    Ok(out)
}

/// Mean time-to-accident result; `feasible_thresholds` is 0 when no
/// threshold satisfied the FAR constraint (the value is then 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MttaReport {
    pub value: f64,
    pub feasible_thresholds: usize,
}

/// Mean TTA over accident videos, averaged over every distinct clip-set
/// score whose FAR is within lambda. Videos that never alarm contribute a
/// TTA of 0.
pub fn mtta(
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    clips: &[EvalClip],
    lambda: f64,
) -> Result<MttaReport> {
    let neg: Vec<f64> = clips.iter().filter(|c| !c.label).map(|c| c.score).collect();
    if neg.is_empty() {
        return Err(Error::NoNegatives);
    }
    if !seqs.iter().any(|s| s.is_accident) {
        return Err(Error::Config("mtta needs at least one accident video".into()));
    }
    let mut thresholds: Vec<f64> = clips.iter().map(|c| c.score).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut per_threshold = Vec::new();
    for &theta in &thresholds {
        if far(&neg, theta)? > lambda {
            continue;
        }
        let records = alarm_records(curves, seqs, theta)?;
        let mean_tta = records
            .iter()
            .map(|r| {
                r.alarm_frame.map_or(0.0, |t| {
                    (r.collision_frame - t) as f64 / curves[r.video_id].fps
                })
            })
            .sum::<f64>()
            / records.len() as f64;
        per_threshold.push(mean_tta);
    }
    if per_threshold.is_empty() {
        return Ok(MttaReport { value: 0.0, feasible_thresholds: 0 });
    }
    let value = per_threshold.iter().sum::<f64>() / per_threshold.len() as f64;
    Ok(MttaReport { value, feasible_thresholds: per_threshold.len() })
}

/// Per-bucket metric values; `None` marks a degenerate bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub auc_l: Option<f64>,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub positives: usize,
}

/// The full evaluation report. Aggregates are means over the 0.5, 1.0 and
/// 1.5 second buckets and are absent if any of those buckets is degenerate.
/// `mauc` is the unconstrained (lambda = 1) counterpart of `mauc_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mauc_l: Option<f64>,
    pub mauc: Option<f64>,
    pub map: Option<f64>,
    pub mtta_l: Option<f64>,
    pub per_bucket: BTreeMap<String, BucketMetrics>,
    pub lambda: f64,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }
}

/// Run the whole protocol: extract clips with a seeded sampler, compute
/// per-bucket constrained/unconstrained metrics, aggregate, and add the
/// threshold-swept mean TTA when onset annotations exist.
pub fn evaluate(
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    lambda: f64,
    clip_seed: u64,
) -> Result<MetricReport> {
    let mut rng = crate::seeding::rng_for(clip_seed, 0x636c_6970);
    let clip_set = extract_clips(curves, seqs, &mut rng)?;
    report_from_clips(&clip_set.clips, curves, seqs, lambda)
}

/// Assemble the report from an already-extracted clip set. The curves and
/// sequences are still needed for the threshold-swept mean TTA.
pub fn report_from_clips(
    clips: &[EvalClip],
    curves: &[RiskCurve],
    seqs: &[FrameSequence],
    lambda: f64,
) -> Result<MetricReport> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda {lambda} outside (0, 1]")));
    }
    let neg: Vec<f64> = clips.iter().filter(|c| !c.label).map(|c| c.score).collect();

    let mut per_bucket = BTreeMap::new();
    let mut bucket_vals = Vec::new();
    for bucket in 0..TAU_STARTS.len() {
        let pos: Vec<f64> = clips
            .iter()
            .filter(|c| c.bucket == Some(bucket))
            .map(|c| c.score)
            .collect();
        let metrics = BucketMetrics {
            auc_l: constrained_auc(&pos, &neg, lambda),
            auc: constrained_auc(&pos, &neg, 1.0),
            ap: average_precision(&pos, &neg, lambda),
            positives: pos.len(),
        };
        bucket_vals.push(metrics.clone());
        per_bucket.insert(bucket_label(bucket).to_string(), metrics);
    }

    let mean_over = |get: &dyn Fn(&BucketMetrics) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = AGGREGATE_BUCKETS
            .iter()
            .filter_map(|&b| get(&bucket_vals[b]))
            .collect();
        (vals.len() == AGGREGATE_BUCKETS.len())
            .then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };

    let have_onsets = seqs
        .iter()
        .filter(|s| s.is_accident)
        .all(|s| s.onset_index.is_some());
    let mtta_l = if have_onsets && seqs.iter().any(|s| s.is_accident) && !neg.is_empty() {
        Some(mtta(curves, seqs, clips, lambda)?.value)
    } else {
        None
    };

    Ok(MetricReport {
        mauc_l: mean_over(&|m| m.auc_l),
        mauc: mean_over(&|m| m.auc),
        map: mean_over(&|m| m.ap),
        mtta_l,
        per_bucket,
        lambda,
    })
}

/// Clip dump as CSV with header `video_id,bucket,score,label,decision_frame`.
pub fn clips_to_csv(clips: &[EvalClip]) -> String {
    let mut out = String::from("video_id,bucket,score,label,decision_frame\n");
    for c in clips {
        let bucket = c.bucket.map_or("", bucket_label);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.video_id,
            bucket,
            c.score,
            c.label as u8,
            c.decision_frame
        ));
    }
    out
}

pub fn clips_from_csv(text: &str) -> Result<Vec<EvalClip>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let parse = |msg: &str| Error::Parse {
            path: "<clips csv>".into(),
            line: idx + 1,
            message: msg.into(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse("expected 5 fields"));
        }
        let bucket = match fields[1] {
            "" => None,
            label => Some(bucket_index(label).ok_or_else(|| parse("unknown bucket"))?),
        };
        out.push(EvalClip {
            video_id: fields[0].parse().map_err(|_| parse("bad video_id"))?,
            score: fields[2].parse().map_err(|_| parse("bad score"))?,
            label: fields[3] == "1",
            bucket,
            decision_frame: fields[4].parse().map_err(|_| parse("bad decision_frame"))?,
        });
    }
    Ok(out)
}

fn bucket_index(label: &str) -> Option<usize> {
    (0..TAU_STARTS.len()).find(|&b| bucket_label(b) == label)
}

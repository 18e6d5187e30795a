//! The three loss kernels of the training objective, each returning both a
//! value and exact gradients.
//!
//! Conventions used throughout:
//! - future-frame regularization acts on raw logits `z_t` with the next
//!   frame's logit treated as a frozen (detached) target, so that frame
//!   contributes no gradient in its target role;
//! - the monotonic constraint and the BCE act on sigmoid scores `a_t`;
//!   `chain_to_logits` converts their score-space gradients to logit space;
//! - the batch mean score used by the confidence term is treated as a
//!   constant when differentiating.

use serde::{Deserialize, Serialize};

use crate::domain::LabelSpec;
use crate::error::{Error, Result};

/// Scores this close to 0 or 1 are clamped before entering a `log`.
pub const BCE_CLAMP: f64 = 1e-7;

/// Weights and margin scale of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub delta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        MarginParams { delta0: 0.01, lambda1: 1.5, lambda2: 1.1 }
    }
}

/// Per-video loss values and the gradient of the weighted total with respect
/// to each frame logit.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l_bce: f64,
    pub l_reg: f64,
    pub l_mono: f64,
    pub total: f64,
    pub dlogits: Vec<f64>,
    /// A BCE anchor score was saturated and clamped before the log.
    pub bce_clamped: bool,
    /// The sequence was too short for the future-frame term.
    pub ffr_degenerate: bool,
}

/// Future-frame regularization: sum over consecutive frames of
/// `(detach(z_next) - z_curr)^2`.
///
/// The returned gradient reflects the stop-gradient: each frame is penalized
/// only in its "current" role, so the final frame's gradient is exactly zero
/// and no term flows through a frame's appearance as a target.
pub fn ffr_loss(logits: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len();
    if n < 2 {
        return (0.0, vec![0.0; n]);
    }
    let mut value = 0.0;
    let mut dlogits = vec![0.0; n];
    for t in 0..n - 1 {
        let diff = logits[t + 1] - logits[t];
        value += diff * diff;
        dlogits[t] = 2.0 * (logits[t] - logits[t + 1]);
    }
    (value, dlogits)
}

/// Prediction confidence: twice the distance of a score from the batch mean.
pub fn confidence(a: f64, a_bar: f64) -> f64 {
    2.0 * (a - a_bar).abs()
}

/// Tolerance margin for a frame pair: `delta0 * dt * c_bar`, where `dt` is
/// the pair's temporal distance normalized by the sequence length.
pub fn adaptive_margin(dt: f64, c_bar: f64, delta0: f64) -> f64 {
    delta0 * dt * c_bar
}

/// Adaptive monotonic constraint over sampled frame pairs `(i, j)`, `j > i`:
/// mean hinge on `a_i - a_j + margin`.
///
/// Subgradient conventions: a hinge exactly at zero is inactive, and
/// `|a - a_bar|` has subgradient 0 at its kink. `a_bar` is a constant.
pub fn amc_loss(
    scores: &[f64],
    pairs: &[(usize, usize)],
    a_bar: f64,
    delta0: f64,
) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let n = scores.len();
    let mut value = 0.0;
    let mut dscores = vec![0.0; n];
    let inv = 1.0 / pairs.len() as f64;
    for &(i, j) in pairs {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        if j <= i {
            return Err(Error::Config(format!("pair ({i}, {j}) is not forward in time")));
        }
        let dt = (j - i) as f64 / n as f64;
        let c_bar = (confidence(scores[i], a_bar) + confidence(scores[j], a_bar)) / 2.0;
        let margin = adaptive_margin(dt, c_bar, delta0);
        let hinge = scores[i] - scores[j] + margin;
        if hinge > 0.0 {
            value += inv * hinge;
            let dmargin_i = delta0 * dt * sign(scores[i] - a_bar);
            let dmargin_j = delta0 * dt * sign(scores[j] - a_bar);
            dscores[i] += inv * (1.0 + dmargin_i);
            dscores[j] += inv * (-1.0 + dmargin_j);
        }
    }
    Ok((value, dscores))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Result of the anchored weighted BCE.
#[derive(Debug, Clone, PartialEq)]
pub struct BceResult {
    pub value: f64,
    pub dscores: Vec<f64>,
    pub clamped: bool,
}

/// Weighted binary cross-entropy over the anchor set only; all other frames
/// receive no direct supervision.
pub fn anchored_bce(scores: &[f64], labels: &LabelSpec) -> Result<BceResult> {
    if labels.anchors.is_empty() {
        return Err(Error::Config("empty anchor set".into()));
    }
    let n = scores.len();
    let inv = 1.0 / labels.anchors.len() as f64;
    let mut value = 0.0;
    let mut dscores = vec![0.0; n];
    let mut clamped = false;
    for anchor in &labels.anchors {
        if anchor.frame >= n {
            return Err(Error::IndexOutOfRange { index: anchor.frame, len: n });
        }
        if anchor.weight < 0.0 {
            return Err(Error::Config("negative anchor weight".into()));
        }
        let raw = scores[anchor.frame];
        let a = if raw < BCE_CLAMP || raw > 1.0 - BCE_CLAMP {
            clamped = true;
            raw.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
        } else {
            raw
        };
        let y = anchor.y();
        value -= inv * anchor.weight * (y * a.ln() + (1.0 - y) * (1.0 - a).ln());
        dscores[anchor.frame] += inv * anchor.weight * (a - y) / (a * (1.0 - a));
    }
    Ok(BceResult { value, dscores, clamped })
}

/// Total objective: `l_bce + lambda1 * l_reg + lambda2 * l_mono`.
pub fn combine(l_bce: f64, l_reg: f64, l_mono: f64, params: &MarginParams) -> f64 {
    l_bce + params.lambda1 * l_reg + params.lambda2 * l_mono
}

/// Convert score-space gradients to logit-space via the sigmoid derivative
/// `a * (1 - a)`.
pub fn chain_to_logits(dscores: &[f64], scores: &[f64]) -> Vec<f64> {
    dscores
        .iter()
        .zip(scores)
        .map(|(&ds, &a)| ds * a * (1.0 - a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sigmoid, Anchor, LabelStrategy};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn label_spec(anchors: Vec<(usize, bool, f64)>) -> LabelSpec {
        LabelSpec {
            anchors: anchors
                .into_iter()
                .map(|(frame, label, weight)| Anchor { frame, label, weight })
                .collect(),
            strategy: LabelStrategy::OnlyCollision,
        }
    }

    #[test]
    fn ffr_constant_sequence_is_zero() {
        for c in [-3.0, 0.0, 1.7] {
            let (v, d) = ffr_loss(&[c, c, c]);
            assert_eq!(v, 0.0);
            assert!(d.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn ffr_hand_example() {
        let (v, d) = ffr_loss(&[0.0, 1.0, 3.0]);
        assert!((v - 5.0).abs() < 1e-15);
        assert_eq!(d, vec![-2.0, -4.0, 0.0]);
    }

    #[test]
    fn ffr_last_frame_gradient_always_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in 2..=50 {
            let z: Vec<f64> = (0..len).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (_, d) = ffr_loss(&z);
            assert_eq!(d[len - 1], 0.0);
        }
    }

    #[test]
    fn ffr_degenerate_lengths() {
        assert_eq!(ffr_loss(&[]), (0.0, vec![]));
        assert_eq!(ffr_loss(&[2.0]), (0.0, vec![0.0]));
    }

    #[test]
    fn ffr_zero_iff_all_logits_equal() {
        let (v, _) = ffr_loss(&[0.3, 0.3, 0.3000001]);
        assert!(v > 0.0);
    }

    /// The detached-target gradient must differ from the full (non-detached)
    /// MSE gradient; this pins the stop-gradient semantics.
    #[test]
    fn ffr_detach_differs_from_full_mse() {
        let z = [0.25, 1.5];
        let (_, d) = ffr_loss(&z);
        assert_eq!(d[1], 0.0);
        // full MSE d/dz2 of (z2 - z1)^2 would be 2 (z2 - z1)
        let full_mse_last = 2.0 * (z[1] - z[0]);
        assert!((full_mse_last - 2.5).abs() < 1e-15);
        assert_ne!(d[1], full_mse_last);
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(0.5, 0.5), 0.0);
        assert!((confidence(0.9, 0.5) - 0.8).abs() < 1e-15);
        assert!((confidence(0.1, 0.5) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(adaptive_margin(0.7, 0.0, 0.01), 0.0);
        assert!((adaptive_margin(0.5, 0.1, 0.01) - 0.0005).abs() < 1e-18);
    }

    #[test]
    fn margin_monotone_in_each_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let dt = rng.random_range(0.0..1.0);
            let c = rng.random_range(0.0..1.0);
            let d0 = rng.random_range(0.0..0.1);
            let base = adaptive_margin(dt, c, d0);
            assert!(adaptive_margin(dt + 0.1, c, d0) >= base);
            assert!(adaptive_margin(dt, c + 0.1, d0) >= base);
            assert!(adaptive_margin(dt, c, d0 + 0.01) >= base);
        }
    }

    #[test]
    fn amc_no_violation_zero_margin() {
        let scores = [0.1, 0.3, 0.5, 0.9];
        let pairs = [(0, 1), (1, 3), (0, 3)];
        let (v, d) = amc_loss(&scores, &pairs, 0.5, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(d.iter().all(|&g| g == 0.0));
    }

    /// Single-pair worked example: a_i=0.6, a_j=0.5, mean 0.5, delta0=0.01,
    /// dt=0.5 gives margin 0.0005 and loss 0.1005.
    #[test]
    fn amc_hand_example() {
        // two frames at distance 1 in a 2-frame sequence gives dt = 0.5
        let scores = [0.6, 0.5];
        let (v, d) = amc_loss(&scores, &[(0, 1)], 0.5, 0.01).unwrap();
        assert!((v - 0.1005).abs() < 1e-12, "got {v}");
        // active hinge: d_i = 1 + 0.01*0.5*sign(0.1), d_j = -1 + 0
        assert!((d[0] - 1.005).abs() < 1e-12);
        assert!((d[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn amc_empty_pairs_is_error() {
        assert!(matches!(amc_loss(&[0.2, 0.4], &[], 0.3, 0.01), Err(Error::NoPairs)));
    }

    #[test]
    fn amc_rejects_bad_pairs() {
        assert!(amc_loss(&[0.2, 0.4], &[(1, 1)], 0.3, 0.01).is_err());
        assert!(amc_loss(&[0.2, 0.4], &[(0, 2)], 0.3, 0.01).is_err());
    }

    #[test]
    fn amc_subgradient_matches_finite_differences_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let eps = 1e-5;
        let mut checked = 0;
        while checked < 50 {
            let n = rng.random_range(3..10usize);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
            let a_bar = rng.random_range(0.2..0.8);
            let delta0 = 0.01;
            let mut pairs = Vec::new();
            for _ in 0..4 {
                let i = rng.random_range(0..n - 1);
                let j = rng.random_range(i + 1..n);
                pairs.push((i, j));
            }
            // skip configurations near hinge or abs kinks
            let near_kink = pairs.iter().any(|&(i, j)| {
                let dt = (j - i) as f64 / n as f64;
                let c = (confidence(scores[i], a_bar) + confidence(scores[j], a_bar)) / 2.0;
                let hinge = scores[i] - scores[j] + adaptive_margin(dt, c, delta0);
                hinge.abs() < 1e-4
                    || (scores[i] - a_bar).abs() < 1e-4
                    || (scores[j] - a_bar).abs() < 1e-4
            });
            if near_kink {
                continue;
            }
            checked += 1;
            let (_, d) = amc_loss(&scores, &pairs, a_bar, delta0).unwrap();
            for k in 0..n {
                let mut plus = scores.clone();
                plus[k] += eps;
                let mut minus = scores.clone();
                minus[k] -= eps;
                let (vp, _) = amc_loss(&plus, &pairs, a_bar, delta0).unwrap();
                let (vm, _) = amc_loss(&minus, &pairs, a_bar, delta0).unwrap();
                let numeric = (vp - vm) / (2.0 * eps);
                let scale = d[k].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (d[k] - numeric).abs() / scale < 1e-5,
                    "score {k}: {} vs {numeric}",
                    d[k]
                );
            }
        }
    }

    #[test]
    fn bce_maximal_entropy_point() {
        let r = anchored_bce(&[0.5], &label_spec(vec![(0, true, 1.0)])).unwrap();
        assert!((r.value - 0.5f64.ln().abs()).abs() < 1e-12);
        let r0 = anchored_bce(&[0.5], &label_spec(vec![(0, false, 1.0)])).unwrap();
        assert!((r.value - r0.value).abs() < 1e-15);
    }

    #[test]
    fn bce_two_anchor_hand_example() {
        // anchors (a=0.2, y=0, w=1) and (a=0.8, y=1, w=10):
        // value = (1/2) * (-ln 0.8 - 10 ln 0.8) = -5.5 ln 0.8
        let scores = [0.2, 0.8];
        let labels = label_spec(vec![(0, false, 1.0), (1, true, 10.0)]);
        let r = anchored_bce(&scores, &labels).unwrap();
        let expect = -5.5 * 0.8f64.ln();
        assert!((r.value - expect).abs() < 1e-12, "got {}", r.value);
        assert!(!r.clamped);
    }

    #[test]
    fn bce_saturated_scores_are_clamped_and_flagged() {
        let labels = label_spec(vec![(0, true, 1.0)]);
        let r = anchored_bce(&[sigmoid(-800.0)], &labels).unwrap();
        assert!(r.clamped);
        assert!(r.value.is_finite());
        assert!(r.dscores[0].is_finite());
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let eps = 1e-6;
        for _ in 0..50 {
            let n = rng.random_range(2..8usize);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
            let mut anchors = Vec::new();
            for f in 0..n {
                if rng.random_bool(0.6) {
                    anchors.push((f, rng.random_bool(0.5), rng.random_range(0.5..10.0)));
                }
            }
            if anchors.is_empty() {
                anchors.push((0, false, 1.0));
            }
            let labels = label_spec(anchors);
            let r = anchored_bce(&scores, &labels).unwrap();
            for k in 0..n {
                let mut plus = scores.clone();
                plus[k] += eps;
                let mut minus = scores.clone();
                minus[k] -= eps;
                let vp = anchored_bce(&plus, &labels).unwrap().value;
                let vm = anchored_bce(&minus, &labels).unwrap().value;
                let numeric = (vp - vm) / (2.0 * eps);
                let scale = r.dscores[k].abs().max(numeric.abs()).max(1e-8);
                assert!((r.dscores[k] - numeric).abs() / scale < 1e-4);
            }
        }
    }

    #[test]
    fn combine_hand_example_and_linearity() {
        let p = MarginParams::default();
        assert!((combine(1.0, 2.0, 0.5, &p) - 4.55).abs() < 1e-12);
        assert_eq!(combine(3.25, 0.0, 0.0, &p), 3.25);
        let zero = MarginParams { delta0: 0.01, lambda1: 0.0, lambda2: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (b, r, m) = (
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
            );
            assert_eq!(combine(b, r, m, &zero), b);
            // linear in each component
            let base = combine(b, r, m, &p);
            assert!((combine(b + 1.0, r, m, &p) - base - 1.0).abs() < 1e-12);
            assert!((combine(b, r + 1.0, m, &p) - base - p.lambda1).abs() < 1e-12);
            assert!((combine(b, r, m + 1.0, &p) - base - p.lambda2).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_examples() {
        assert_eq!(chain_to_logits(&[0.0, 0.0], &[0.3, 0.9]), vec![0.0, 0.0]);
        let d = chain_to_logits(&[1.0], &[0.5]);
        assert!((d[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chained_bce_matches_finite_differences_through_sigmoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let eps = 1e-5;
        for _ in 0..30 {
            let n = rng.random_range(2..6usize);
            let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let labels = label_spec(
                (0..n)
                    .map(|f| (f, rng.random_bool(0.5), rng.random_range(0.5..5.0)))
                    .collect(),
            );
            let scores: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
            let r = anchored_bce(&scores, &labels).unwrap();
            let dlogits = chain_to_logits(&r.dscores, &scores);
            for k in 0..n {
                let eval = |z: &[f64]| {
                    let a: Vec<f64> = z.iter().map(|&x| sigmoid(x)).collect();
                    anchored_bce(&a, &labels).unwrap().value
                };
                let mut plus = logits.clone();
                plus[k] += eps;
                let mut minus = logits.clone();
                minus[k] -= eps;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let scale = dlogits[k].abs().max(numeric.abs()).max(1e-8);
                assert!((dlogits[k] - numeric).abs() / scale < 1e-5);
            }
        }
    }
}

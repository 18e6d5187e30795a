//! Verify the hand-derived gradients against central finite differences.
//!
//! The check runs the full per-video objective (anchored BCE + future-frame
//! regularization + monotonic constraint) through the scorer for both
//! architectures. The future-frame targets, the batch mean, and the sampled
//! pairs are held frozen, because that is exactly what backpropagation sees.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use riskprop::domain::{make_snippet, FrameSequence};
use riskprop::losses::{amc_loss, anchored_bce, combine};
use riskprop::pair_sampler::sample_pairs;
use riskprop::scorer::{ScorerKind, ScorerState};
use riskprop::trainer::{batch_mean_abar, labeling, score_sequence, video_loss, TrainConfig};

fn main() -> riskprop::Result<()> {
    let cfg = TrainConfig { window: 3, ..TrainConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let frames = 16;
    let dim = 3;
    let seq = FrameSequence {
        features: (0..frames)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        fps: 10.0,
        is_accident: true,
        collision_index: Some(frames - 1),
        onset_index: Some(4),
        latent_hazard: None,
    };

    for kind in [ScorerKind::Linear, ScorerKind::Mlp(5)] {
        let mut state = ScorerState::init(kind, cfg.window * dim, 99)?;
        state.params.iter_mut().for_each(|p| *p *= 4.0);

        let curve = score_sequence(&state, &seq, cfg.window)?;
        let a_bar = batch_mean_abar(std::slice::from_ref(&curve), &[true]).unwrap();
        let pairs = sample_pairs(frames, &cfg.sampler, &mut rng)?;
        let report = video_loss(&seq, &curve, &cfg, Some(&pairs), Some(a_bar))?;

        state.zero_grad();
        for t in 0..frames {
            let snip = make_snippet(&seq, t, cfg.window)?;
            let (_, tape) = state.forward(&snip)?;
            state.backward(&tape, report.dlogits[t])?;
        }
        let analytic = state.grads.clone();

        let frozen_targets = curve.logits.clone();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for k in 0..state.num_params() {
            let orig = state.params[k];
            let mut eval = |p: f64| -> f64 {
                state.params[k] = p;
                let c = score_sequence(&state, &seq, cfg.window).unwrap();
                let labels = labeling(&seq, cfg.labeling, cfg.w_pos, cfg.w_neg).unwrap();
                let bce = anchored_bce(&c.scores, &labels).unwrap().value;
                let reg: f64 = (0..c.len() - 1)
                    .map(|t| (frozen_targets[t + 1] - c.logits[t]).powi(2))
                    .sum();
                let (mono, _) = amc_loss(&c.scores, &pairs, a_bar, cfg.delta0).unwrap();
                combine(bce, reg, mono, &cfg.margin_params())
            };
            let numeric = (eval(orig + eps) - eval(orig - eps)) / (2.0 * eps);
            state.params[k] = orig;
            let scale = analytic[k].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic[k] - numeric).abs() / scale);
        }
        println!(
            "{kind:?}: {} parameters, loss {:.4}, worst relative gradient error {worst:.2e}",
            state.num_params(),
            report.total
        );
    }
    Ok(())
}

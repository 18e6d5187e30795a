//! The FAR-constrained metric suite on a small hand-built clip set.
//!
//! ```bash
//! cargo run --example far_constrained_metrics
//! ```

use riskprop::domain::{FrameSequence, RiskCurve};
use riskprop::metrics::{average_precision, constrained_auc, far, mtta, EvalClip};

fn main() -> riskprop::Result<()> {
    // positive clips from pre-collision frames, negatives from safe driving
    let pos = [0.82, 0.74, 0.66, 0.31];
    let neg = [0.12, 0.18, 0.22, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7];

    println!("positives {pos:?}");
    println!("negatives {neg:?}\n");

    for theta in [0.3, 0.55, 0.75] {
        println!("FAR(theta = {theta}) = {:.2}", far(&neg, theta)?);
    }
    println!();

    for lambda in [0.1, 0.5, 1.0] {
        let auc = constrained_auc(&pos, &neg, lambda).unwrap();
        let ap = average_precision(&pos, &neg, lambda).unwrap();
        println!("lambda {lambda:<4}: constrained AUC {auc:.4}, constrained AP {ap:.4}");
    }
    println!("\nat lambda 0.1 only the top decile of negative scores may be crossed,");
    println!("so the low-scoring positive (0.31) is out of reach and both metrics drop.\n");

    // mean time-to-accident over FAR-feasible thresholds
    let scores = vec![0.1, 0.15, 0.2, 0.3, 0.55, 0.74, 0.82, 0.9];
    let frames = scores.len();
    let curve = RiskCurve { logits: vec![0.0; frames], scores, fps: 10.0 };
    let seq = FrameSequence {
        features: vec![vec![0.0]; frames],
        fps: 10.0,
        is_accident: true,
        collision_index: Some(frames - 1),
        onset_index: Some(2),
        latent_hazard: None,
    };
    let clips: Vec<EvalClip> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .enumerate()
        .map(|(i, (score, label))| EvalClip {
            video_id: 0,
            score,
            label,
            bucket: label.then_some(1),
            decision_frame: i,
        })
        .collect();
    let report = mtta(std::slice::from_ref(&curve), std::slice::from_ref(&seq), &clips, 0.1)?;
    println!(
        "mTTA^0.1 = {:.3} s over {} FAR-feasible thresholds (alarms counted from onset only)",
        report.value, report.feasible_thresholds
    );
    Ok(())
}

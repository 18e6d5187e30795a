//! Train the full objective on a synthetic dataset and run the
//! FAR-constrained evaluation, printing the metric report JSON.
//!
//! ```bash
//! cargo run --release --example train_and_evaluate
//! ```

use riskprop::metrics::evaluate;
use riskprop::synthgen::{generate_split, GenConfig};
use riskprop::trainer::{score_sequence, train, TrainConfig};
use riskprop::RiskCurve;

fn main() -> riskprop::Result<()> {
    let gen_cfg = GenConfig { num_accident: 80, num_safe: 80, seed: 1, ..GenConfig::default() };
    let (train_set, test_set) = generate_split(&gen_cfg)?;
    println!("{} train / {} test videos", train_set.len(), test_set.len());

    let cfg = TrainConfig { epochs: 10, seed: 1, ..TrainConfig::default() };
    let (state, log) = train(&train_set, Some(&test_set), &cfg)?;
    for record in log.epochs.iter().step_by(3) {
        println!(
            "epoch {:>2}: bce {:.4} reg {:.4} mono {:.4} total {:.4} val mAUC^0.1 {:.3}",
            record.epoch,
            record.l_bce,
            record.l_reg,
            record.l_mono,
            record.total,
            record.val_mauc.unwrap_or(f64::NAN),
        );
    }

    let curves: Vec<RiskCurve> = test_set
        .iter()
        .map(|seq| score_sequence(&state, seq, cfg.window))
        .collect::<riskprop::Result<_>>()?;
    let report = evaluate(&curves, &test_set, 0.1, 1)?;
    println!("\nmetric report:\n{}", report.to_json());
    Ok(())
}

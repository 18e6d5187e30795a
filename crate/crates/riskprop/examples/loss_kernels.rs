//! Evaluate the three loss kernels on tiny hand-checkable inputs.
//!
//! ```bash
//! cargo run --example loss_kernels
//! ```

use riskprop::domain::{Anchor, LabelSpec, LabelStrategy};
use riskprop::losses::{
    adaptive_margin, amc_loss, anchored_bce, chain_to_logits, combine, confidence, ffr_loss,
    MarginParams,
};

fn main() -> riskprop::Result<()> {
    // future-frame regularization on a three-frame logit curve
    let logits = [0.0, 1.0, 3.0];
    let (l_reg, dlogits) = ffr_loss(&logits);
    println!("ffr: logits {logits:?}");
    println!("     value {l_reg} (= 1^2 + 2^2), dlogits {dlogits:?}");
    println!("     note the final frame's gradient is exactly 0 (detached target)\n");

    // adaptive monotonic constraint, single violated pair
    let scores = [0.6, 0.5];
    let a_bar = 0.5;
    let c = (confidence(scores[0], a_bar) + confidence(scores[1], a_bar)) / 2.0;
    let margin = adaptive_margin(0.5, c, 0.01);
    let (l_mono, dscores) = amc_loss(&scores, &[(0, 1)], a_bar, 0.01)?;
    println!("amc: pair (0.6 -> 0.5) against batch mean {a_bar}");
    println!("     mean confidence {c}, margin {margin}, loss {l_mono}");
    println!("     subgradient {dscores:?}\n");

    // anchored BCE with a heavily weighted collision frame
    let curve = [0.2, 0.35, 0.8];
    let labels = LabelSpec {
        anchors: vec![
            Anchor { frame: 0, label: false, weight: 1.0 },
            Anchor { frame: 2, label: true, weight: 10.0 },
        ],
        strategy: LabelStrategy::OnlyCollision,
    };
    let bce = anchored_bce(&curve, &labels)?;
    println!("bce: scores {curve:?}, anchors (frame 0, y=0, w=1) and (frame 2, y=1, w=10)");
    println!("     value {:.6}, dscores {:?}", bce.value, bce.dscores);
    println!("     middle frame untouched: no label, no gradient\n");

    let params = MarginParams::default();
    let total = combine(bce.value, l_reg, l_mono, &params);
    println!(
        "total = bce + {} * reg + {} * mono = {total:.6}",
        params.lambda1, params.lambda2
    );
    let dlogits = chain_to_logits(&bce.dscores, &curve);
    println!("score-space BCE gradient chained through the sigmoid: {dlogits:?}");
    Ok(())
}

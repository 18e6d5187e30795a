//! What the stop-gradient in the future-frame loss actually does.
//!
//! The loss value is an ordinary MSE between each logit and its successor,
//! but the successor is a frozen target: it receives no gradient from its
//! target role. Risk therefore flows strictly backward in time — the
//! collision frame pulls its predecessor up, never the other way around.
//!
//! ```bash
//! cargo run --example stop_gradient
//! ```

use riskprop::losses::ffr_loss;

fn main() {
    let z = [0.2, 0.9, 2.4];
    let (value, detached) = ffr_loss(&z);

    // gradient of the same value WITHOUT the detach, for contrast
    let full_mse = [
        2.0 * (z[0] - z[1]),
        2.0 * (z[1] - z[0]) + 2.0 * (z[1] - z[2]),
        2.0 * (z[2] - z[1]),
    ];

    println!("logits            {z:?}");
    println!("loss value        {value:.4}");
    println!("detached gradient {detached:?}");
    println!("full-MSE gradient {full_mse:?}");
    println!();
    println!("with the detach, frame 2 (the most collision-adjacent) keeps its");
    println!("high logit: gradient 0 instead of {:+.2}.", full_mse[2]);
    println!("frame 1 is pulled toward frame 2, frame 0 toward frame 1 — the");
    println!("collision anchor propagates backward through the chain.");

    // simulate a few steps of gradient descent on the logits directly
    let mut z = vec![0.0, 0.0, 4.0];
    for step in 0..40 {
        let (_, grad) = ffr_loss(&z);
        for (zi, gi) in z.iter_mut().zip(&grad) {
            *zi -= 0.1 * gi;
        }
        if step % 10 == 9 {
            println!("after {:>2} steps: {:.3?}", step + 1, z);
        }
    }
    println!("the anchored final logit is untouched; earlier frames rise to meet it.");
}

//! Frame-pair sampling for the monotonic constraint: offset distribution
//! and bounds on a 100-frame sequence.
//!
//! ```bash
//! cargo run --example pair_sampling
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskprop::pair_sampler::{sample_pairs, SamplerConfig};

fn main() -> riskprop::Result<()> {
    let frames = 100;
    let cfg = SamplerConfig { pairs_per_sequence: 20_000, ..SamplerConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs = sample_pairs(frames, &cfg, &mut rng)?;

    println!(
        "{} pairs from a {frames}-frame sequence, offsets drawn from [{}, {}]",
        pairs.len(),
        cfg.d_min,
        cfg.d_max
    );
    println!("first five: {:?}\n", &pairs[..5]);

    // histogram of normalized offsets in 10 bins
    let mut bins = [0usize; 10];
    for &(i, j) in &pairs {
        let gap = (j - i) as f64 / frames as f64;
        bins[((gap * 10.0) as usize).min(9)] += 1;
    }
    println!("normalized offset histogram:");
    for (b, &count) in bins.iter().enumerate() {
        let bar = "#".repeat(count / 60);
        println!("  [{:.1}, {:.1}) {count:>5} {bar}", b as f64 / 10.0, (b + 1) as f64 / 10.0);
    }

    let all_forward = pairs.iter().all(|&(i, j)| i < j && j < frames);
    println!("\nall pairs strictly forward and in range: {all_forward}");
    Ok(())
}

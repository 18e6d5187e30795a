//! Generate a synthetic dashcam-like dataset with ground-truth hazard and
//! write it as train/test JSONL files.
//!
//! ```bash
//! cargo run --example generate_dataset
//! ```

use riskprop::synthgen::{generate_split, write_dataset, GenConfig, RampShape};

fn main() -> riskprop::Result<()> {
    let cfg = GenConfig {
        num_accident: 40,
        num_safe: 40,
        ramp_shape: RampShape::Sigmoid,
        seed: 7,
        ..GenConfig::default()
    };
    let (train, test) = generate_split(&cfg)?;

    let out = std::env::temp_dir().join("riskprop_example_dataset");
    std::fs::create_dir_all(&out).expect("temp dir");
    write_dataset(&train, &out.join("train.jsonl"))?;
    write_dataset(&test, &out.join("test.jsonl"))?;

    println!("wrote {} train / {} test sequences to {}", train.len(), test.len(), out.display());
    let acc = train.iter().find(|s| s.is_accident).unwrap();
    let hazard = acc.latent_hazard.as_ref().unwrap();
    let onset = acc.onset_index.unwrap();
    println!(
        "first accident video: {} frames at {} fps, onset at frame {onset}, collision at {}",
        acc.num_frames(),
        acc.fps,
        acc.collision_index.unwrap()
    );
    println!(
        "hazard checkpoints: h[onset-1] = {}, h[onset+10] = {:.3}, h[last] = {}",
        hazard[onset - 1],
        hazard[onset + 10],
        hazard[acc.collision_index.unwrap()]
    );
    let safe = train.iter().find(|s| !s.is_accident).unwrap();
    println!(
        "first safe video: hazard identically zero = {}",
        safe.latent_hazard.as_ref().unwrap().iter().all(|&h| h == 0.0)
    );
    Ok(())
}

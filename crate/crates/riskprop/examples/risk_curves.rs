//! Score test videos with a trained model and export per-video risk curves
//! as CSV and SVG, plus the collision-aligned dataset mean curve.
//!
//! ```bash
//! cargo run --release --example risk_curves
//! ```

use riskprop::cli;
use riskprop::synthgen::{generate_split, write_dataset, GenConfig};

fn main() -> riskprop::Result<()> {
    let root = std::env::temp_dir().join("riskprop_example_curves");
    let _ = std::fs::remove_dir_all(&root);
    let data = root.join("data");
    std::fs::create_dir_all(&data).expect("temp dir");

    let gen_cfg = GenConfig { num_accident: 40, num_safe: 40, seed: 3, ..GenConfig::default() };
    let (train_set, test_set) = generate_split(&gen_cfg)?;
    write_dataset(&train_set, &data.join("train.jsonl"))?;
    write_dataset(&test_set, &data.join("test.jsonl"))?;

    // drive the same code paths the binary uses
    let model = root.join("model");
    cli::run([
        "riskprop", "train", "--seed", "3", "--epochs", "20", "--lambda1", "6",
        "--data", data.to_str().unwrap(), "-o", model.to_str().unwrap(),
    ])?;
    let out = root.join("curves");
    cli::run([
        "riskprop", "curves",
        "--checkpoint", model.join("checkpoint.json").to_str().unwrap(),
        "--data", data.to_str().unwrap(), "--limit", "6", "--threshold", "0.5",
        "-o", out.to_str().unwrap(),
    ])?;

    println!("\ncurve files in {}:", out.display());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .expect("read out dir")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
    println!("\nopen a video_*.svg to see the risk curve against the latent hazard,");
    println!("and mean_curve.svg for the dataset-level rise toward the collision.");
    Ok(())
}

//! End-to-end tests of the command-line surface: file outputs, manifest
//! guards, config overrides, and reproducibility.

use std::fs;
use std::path::{Path, PathBuf};

use riskprop::cli::{self, RunManifest};
use riskprop::error::Error;
use riskprop::metrics::MetricReport;
use riskprop::scorer::ScorerState;

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("riskprop_cli_tests").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> riskprop::Result<()> {
    cli::run(std::iter::once("riskprop").chain(args.iter().copied()))
}

fn gen_small(dir: &Path, seed: &str) {
    run(&[
        "gen", "--seed", seed, "--accidents", "10", "--safe", "10", "--frames", "40",
        "-o", dir.to_str().unwrap(),
    ])
    .expect("gen succeeds");
}

fn read_manifest(dir: &Path) -> RunManifest {
    let text = fs::read_to_string(dir.join("manifest.json")).expect("manifest exists");
    serde_json::from_str(&text).expect("manifest parses")
}

#[test]
fn gen_writes_dataset_and_manifest_deterministically() {
    let a = fresh_dir("gen_a");
    let b = fresh_dir("gen_b");
    let c = fresh_dir("gen_c");
    gen_small(&a, "7");
    gen_small(&b, "7");
    gen_small(&c, "8");

    for dir in [&a, &b, &c] {
        assert!(dir.join("train.jsonl").exists());
        assert!(dir.join("test.jsonl").exists());
        assert!(dir.join("manifest.json").exists());
    }
    assert_eq!(
        fs::read(a.join("train.jsonl")).unwrap(),
        fs::read(b.join("train.jsonl")).unwrap()
    );
    assert_eq!(read_manifest(&a).dataset_hash, read_manifest(&b).dataset_hash);
    assert_ne!(read_manifest(&a).dataset_hash, read_manifest(&c).dataset_hash);
    assert_eq!(read_manifest(&a).command, "gen");
    assert_eq!(read_manifest(&a).seed, 7);
}

#[test]
fn gen_rejects_impossible_dims() {
    let dir = fresh_dir("gen_bad");
    let err = run(&[
        "gen", "--signal-dims", "9", "--feature-dim", "8", "-o", dir.to_str().unwrap(),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn train_outputs_and_reruns_are_identical() {
    let data = fresh_dir("train_data");
    gen_small(&data, "3");
    let out_a = fresh_dir("train_a");
    let out_b = fresh_dir("train_b");
    for out in [&out_a, &out_b] {
        run(&[
            "train", "--seed", "3", "--epochs", "2", "--data", data.to_str().unwrap(),
            "-o", out.to_str().unwrap(),
        ])
        .expect("train succeeds");
        assert!(out.join("checkpoint.json").exists());
        assert!(out.join("train_log.csv").exists());
        let manifest = read_manifest(out);
        assert_eq!(manifest.command, "train");
        assert_eq!(manifest.dataset_hash, cli::hash_dataset_source(&data).unwrap());
    }
    assert_eq!(
        fs::read(out_a.join("checkpoint.json")).unwrap(),
        fs::read(out_b.join("checkpoint.json")).unwrap()
    );
    // the log is identical apart from the wall-clock column
    let strip = |path: &Path| -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
            .collect()
    };
    assert_eq!(strip(&out_a.join("train_log.csv")), strip(&out_b.join("train_log.csv")));
    let header = fs::read_to_string(out_a.join("train_log.csv")).unwrap();
    assert!(header.starts_with("epoch,l_bce,l_reg,l_mono,total,val_mauc,seconds\n"));

    let state = ScorerState::load(&out_a.join("checkpoint.json")).unwrap();
    assert!(state.num_params() > 0);
}

#[test]
fn config_file_fields_with_cli_overrides() {
    let data = fresh_dir("cfg_data");
    gen_small(&data, "4");
    let out = fresh_dir("cfg_out");
    let cfg_path = out.join("config.json");
    fs::write(&cfg_path, r#"{"epochs": 3, "lambda1": 0.25, "window": 4}"#).unwrap();
    run(&[
        "train", "--seed", "4", "--config", cfg_path.to_str().unwrap(), "--epochs", "2",
        "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ])
    .expect("train succeeds");
    let manifest = read_manifest(&out);
    assert_eq!(manifest.config["epochs"], 2); // CLI wins
    assert_eq!(manifest.config["lambda1"], 0.25); // config file survives
    assert_eq!(manifest.config["window"], 4);
    let log = fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3); // header + 2 epochs
}

#[test]
fn zero_loss_weights_match_disabled_flags() {
    let data = fresh_dir("zero_data");
    gen_small(&data, "21");
    let zeroed = fresh_dir("zero_weights");
    let disabled = fresh_dir("zero_flags");
    run(&[
        "train", "--seed", "21", "--epochs", "2", "--lambda1", "0", "--lambda2", "0",
        "--data", data.to_str().unwrap(), "-o", zeroed.to_str().unwrap(),
    ])
    .unwrap();
    run(&[
        "train", "--seed", "21", "--epochs", "2", "--no-ffr", "--no-amc",
        "--data", data.to_str().unwrap(), "-o", disabled.to_str().unwrap(),
    ])
    .unwrap();
    assert_eq!(
        fs::read(zeroed.join("checkpoint.json")).unwrap(),
        fs::read(disabled.join("checkpoint.json")).unwrap()
    );
}

#[test]
fn labeling_flag_is_recorded_in_the_manifest() {
    let data = fresh_dir("label_data");
    gen_small(&data, "22");
    let out = fresh_dir("label_out");
    run(&[
        "train", "--seed", "22", "--epochs", "1", "--labeling", "onset",
        "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ])
    .unwrap();
    let manifest = read_manifest(&out);
    assert_eq!(manifest.config["labeling"], "anomaly_onset");

    let out_interval = fresh_dir("label_interval");
    run(&[
        "train", "--seed", "22", "--epochs", "1", "--labeling", "interval",
        "--interval-seconds", "1.5",
        "--data", data.to_str().unwrap(), "-o", out_interval.to_str().unwrap(),
    ])
    .unwrap();
    let manifest = read_manifest(&out_interval);
    assert_eq!(manifest.config["labeling"]["fixed_interval"], 1.5);
}

#[test]
fn eval_guard_reports_and_lambda_one() {
    let data = fresh_dir("eval_data");
    gen_small(&data, "5");
    let other = fresh_dir("eval_other");
    gen_small(&other, "6");
    let model = fresh_dir("eval_model");
    run(&[
        "train", "--seed", "5", "--epochs", "2", "--data", data.to_str().unwrap(),
        "-o", model.to_str().unwrap(),
    ])
    .unwrap();
    let ckpt = model.join("checkpoint.json");

    // wrong dataset is refused unless forced
    let out = fresh_dir("eval_wrong");
    let err = run(&[
        "eval", "--checkpoint", ckpt.to_str().unwrap(), "--data", other.to_str().unwrap(),
        "-o", out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::DatasetHashMismatch { .. }));
    run(&[
        "eval", "--checkpoint", ckpt.to_str().unwrap(), "--data", other.to_str().unwrap(),
        "-o", out.to_str().unwrap(), "--force",
    ])
    .expect("forced eval succeeds");

    // matching dataset: reports written, reruns byte-identical
    let out_a = fresh_dir("eval_a");
    let out_b = fresh_dir("eval_b");
    for out in [&out_a, &out_b] {
        run(&[
            "eval", "--seed", "5", "--checkpoint", ckpt.to_str().unwrap(),
            "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
        ])
        .expect("eval succeeds");
        assert!(out.join("metrics.json").exists());
        assert!(out.join("clips.csv").exists());
    }
    assert_eq!(
        fs::read(out_a.join("metrics.json")).unwrap(),
        fs::read(out_b.join("metrics.json")).unwrap()
    );
    let report: MetricReport =
        serde_json::from_str(&fs::read_to_string(out_a.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report.lambda, 0.1);
    assert_eq!(report.per_bucket.len(), 4);

    // lambda 1.0 removes the constraint: mauc_l equals mauc
    let out_l1 = fresh_dir("eval_l1");
    run(&[
        "eval", "--seed", "5", "--checkpoint", ckpt.to_str().unwrap(),
        "--data", data.to_str().unwrap(), "--lambda", "1.0", "-o", out_l1.to_str().unwrap(),
    ])
    .unwrap();
    let report: MetricReport =
        serde_json::from_str(&fs::read_to_string(out_l1.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report.mauc_l, report.mauc);

    // missing checkpoint is a clean error
    let out_missing = fresh_dir("eval_missing");
    assert!(run(&[
        "eval", "--checkpoint", model.join("nope.json").to_str().unwrap(),
        "--data", data.to_str().unwrap(), "-o", out_missing.to_str().unwrap(),
    ])
    .is_err());
}

/// Recompute the aggregate report from the saved clip file with a one-pass
/// reference implementation and compare against metrics.json.
#[test]
fn eval_report_matches_clip_file_recompute() {
    let data = fresh_dir("recompute_data");
    gen_small(&data, "9");
    let model = fresh_dir("recompute_model");
    run(&[
        "train", "--seed", "9", "--epochs", "2", "--data", data.to_str().unwrap(),
        "-o", model.to_str().unwrap(),
    ])
    .unwrap();
    let out = fresh_dir("recompute_eval");
    run(&[
        "eval", "--seed", "9", "--checkpoint", model.join("checkpoint.json").to_str().unwrap(),
        "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ])
    .unwrap();

    let report: MetricReport =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let clips =
        riskprop::metrics::clips_from_csv(&fs::read_to_string(out.join("clips.csv")).unwrap())
            .unwrap();
    let neg: Vec<f64> = clips.iter().filter(|c| !c.label).map(|c| c.score).collect();

    // reference: recount ROC points per threshold, trapezoid up to lambda
    let pauc = |pos: &[f64], lambda: f64| -> f64 {
        let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        thresholds.reverse();
        let mut points = vec![(0.0f64, 0.0f64)];
        for &theta in &thresholds {
            let tp = pos.iter().filter(|&&s| s >= theta).count() as f64;
            let fp = neg.iter().filter(|&&s| s >= theta).count() as f64;
            points.push((fp / neg.len() as f64, tp / pos.len() as f64));
        }
        let mut area = 0.0;
        for w in points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1 <= lambda {
                area += (x1 - x0) * (y0 + y1) / 2.0;
            } else {
                if x0 < lambda {
                    let y_at = y0 + (lambda - x0) / (x1 - x0) * (y1 - y0);
                    area += (lambda - x0) * (y0 + y_at) / 2.0;
                }
                break;
            }
        }
        area / lambda
    };
    let ap = |pos: &[f64], lambda: f64| -> f64 {
        let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        thresholds.reverse();
        let (mut value, mut recall_prev) = (0.0, 0.0);
        for &theta in &thresholds {
            let tp = pos.iter().filter(|&&s| s >= theta).count() as f64;
            let fp = neg.iter().filter(|&&s| s >= theta).count() as f64;
            if fp / neg.len() as f64 > lambda {
                break;
            }
            let recall = tp / pos.len() as f64;
            value += (recall - recall_prev) * (tp / (tp + fp));
            recall_prev = recall;
        }
        value
    };

    let mut mauc_l = 0.0;
    let mut mauc = 0.0;
    let mut map = 0.0;
    for bucket in 1..=3usize {
        let pos: Vec<f64> = clips
            .iter()
            .filter(|c| c.bucket == Some(bucket))
            .map(|c| c.score)
            .collect();
        assert!(!pos.is_empty());
        mauc_l += pauc(&pos, 0.1) / 3.0;
        mauc += pauc(&pos, 1.0) / 3.0;
        map += ap(&pos, 0.1) / 3.0;
    }
    assert!((report.mauc_l.unwrap() - mauc_l).abs() < 1e-12);
    assert!((report.mauc.unwrap() - mauc).abs() < 1e-12);
    assert!((report.map.unwrap() - map).abs() < 1e-12);
}

#[test]
fn eval_on_noiseless_separable_data_is_perfect() {
    let data = fresh_dir("sep_data");
    run(&[
        "gen", "--seed", "11", "--accidents", "12", "--safe", "12", "--frames", "40",
        "--noise-sigma", "0", "--signal-dims", "8", "--distractors", "0",
        "--onset-min", "0.3", "--onset-max", "0.4", "-o", data.to_str().unwrap(),
    ])
    .unwrap();
    let model = fresh_dir("sep_model");
    run(&[
        "train", "--seed", "11", "--epochs", "10", "--data", data.to_str().unwrap(),
        "-o", model.to_str().unwrap(),
    ])
    .unwrap();
    let out = fresh_dir("sep_eval");
    run(&[
        "eval", "--seed", "11", "--checkpoint", model.join("checkpoint.json").to_str().unwrap(),
        "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ])
    .unwrap();
    let report: MetricReport =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report.mauc_l, Some(1.0), "separable data must give mAUC^0.1 = 1.0");
}

#[test]
fn curves_outputs_and_mean_recompute() {
    let data = fresh_dir("curves_data");
    gen_small(&data, "13");
    let model = fresh_dir("curves_model");
    run(&[
        "train", "--seed", "13", "--epochs", "2", "--data", data.to_str().unwrap(),
        "-o", model.to_str().unwrap(),
    ])
    .unwrap();
    let out = fresh_dir("curves_out");
    run(&[
        "curves", "--checkpoint", model.join("checkpoint.json").to_str().unwrap(),
        "--data", data.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ])
    .unwrap();

    let test_set = riskprop::synthgen::read_dataset(&data.join("test.jsonl")).unwrap();
    let mut aligned: std::collections::BTreeMap<i64, (f64, usize)> = Default::default();
    for (id, seq) in test_set.iter().enumerate() {
        let csv_path = out.join(format!("video_{id:04}.csv"));
        let text = fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frame,z,a,latent_hazard,onset,collision");
        assert_eq!(lines.len(), seq.num_frames() + 1);

        let svg = fs::read_to_string(out.join(format!("video_{id:04}.svg"))).unwrap();
        // risk + hazard + threshold line, one polyline each
        assert_eq!(svg.matches("<polyline").count(), 3);

        // accumulate the collision-aligned mean from the per-video CSVs
        let mut collision = None;
        let mut scores = Vec::new();
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            scores.push(fields[2].parse::<f64>().unwrap());
            if fields[5] == "1" {
                collision = Some(fields[0].parse::<i64>().unwrap());
            }
        }
        if let Some(collision) = collision {
            for (t, &a) in scores.iter().enumerate() {
                let entry = aligned.entry(t as i64 - collision).or_insert((0.0, 0));
                entry.0 += a;
                entry.1 += 1;
            }
        }
    }

    let mean_text = fs::read_to_string(out.join("mean_curve.csv")).unwrap();
    let mean_lines: Vec<&str> = mean_text.lines().collect();
    assert_eq!(mean_lines[0], "offset_frames,mean_score,videos");
    assert_eq!(mean_lines.len(), aligned.len() + 1);
    for line in &mean_lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let offset: i64 = fields[0].parse().unwrap();
        let mean: f64 = fields[1].parse().unwrap();
        let count: usize = fields[2].parse().unwrap();
        let (sum, n) = aligned[&offset];
        assert_eq!(count, n);
        assert!((mean - sum / n as f64).abs() < 1e-12, "offset {offset}");
    }

    let mean_svg = fs::read_to_string(out.join("mean_curve.svg")).unwrap();
    assert_eq!(mean_svg.matches("<polyline").count(), 2);
    assert!(out.join("manifest.json").exists());
}

/// Cells that cannot run (here: onset labeling without onset annotations)
/// are recorded as failed while the rest of the grid completes.
#[test]
fn ablate_records_cell_failures_and_continues() {
    let gen_cfg = riskprop::GenConfig {
        num_accident: 6,
        num_safe: 6,
        frames_per_video: 40,
        seed: 31,
        ..riskprop::GenConfig::default()
    };
    let (mut train_set, mut test_set) = riskprop::generate_split(&gen_cfg).unwrap();
    for seq in train_set.iter_mut().chain(test_set.iter_mut()) {
        seq.onset_index = None;
    }
    let base = riskprop::TrainConfig { epochs: 1, seed: 31, ..riskprop::TrainConfig::default() };
    let cells = cli::run_ablation(&train_set, &test_set, &base, 0.1, 2.0, 2);
    assert_eq!(cells.len(), 12);
    for cell in &cells {
        let is_onset = cli::labeling_name(&cell.labeling) == "onset";
        assert_eq!(cell.error.is_some(), is_onset, "exp {} {:?}", cell.exp, cell.labeling);
        assert_eq!(cell.report.is_some(), !is_onset);
    }
    let csv = cli::ablation_csv(&cells);
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.contains("onset annotations") || csv.contains("onset index"));
}

#[test]
fn train_on_missing_dataset_is_a_clean_error() {
    let out = fresh_dir("missing_data_out");
    let err = run(&[
        "train", "--data", "/nonexistent/riskprop_dataset", "-o", out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn ablate_grid_shape_and_determinism() {
    let data = fresh_dir("ablate_data");
    gen_small(&data, "17");
    let out_a = fresh_dir("ablate_a");
    let out_b = fresh_dir("ablate_b");
    for out in [&out_a, &out_b] {
        run(&[
            "ablate", "--seed", "17", "--epochs", "1", "--data", data.to_str().unwrap(),
            "-o", out.to_str().unwrap(),
        ])
        .expect("ablate succeeds");
        let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 13, "header + 12 cells");
        assert_eq!(lines[0], "exp,labeling,ffr,amc,mauc_l,mauc,map,mtta_l,error");
        assert!(out.join("ablation.txt").exists());
        assert!(out.join("manifest.json").exists());
    }
    assert_eq!(
        fs::read(out_a.join("ablation.csv")).unwrap(),
        fs::read(out_b.join("ablation.csv")).unwrap()
    );
}

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn speedhist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speedhist"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = speedhist(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    speedhist(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Header and rows of a simple CSV file.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn partition_writes_requested_cluster_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--grid", "30x30", "--seed", "7", "--out", p(&data)]);
    for f in ["segments.csv", "turns.csv", "observations.csv", "labels.csv"] {
        assert!(data.join(f).exists(), "{f}");
    }
    ok(&["partition", "--data", p(&data), "--clusters", "10"]);
    let (header, rows) = table(&data.join("assignment.csv"));
    assert_eq!(header, ["segment_id", "cluster"]);
    let (_, segments) = table(&data.join("segments.csv"));
    assert_eq!(rows.len(), segments.len());
    let ids: BTreeSet<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(ids, (0..10).collect());
}

#[test]
fn train_writes_one_checkpoint_per_batch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&["gen-data", "--grid", "30x30", "--seed", "7", "--out", p(&data)]);
    ok(&[
        "train", "--data", p(&data), "--model", "full-gcn", "--clusters", "100", "--batches", "100", "--epochs",
        "2", "--seed", "3", "--out", p(&run),
    ]);
    let models = run.join("models");
    for b in 0..100 {
        assert!(models.join(format!("r0_b{b}.json")).exists(), "checkpoint {b}");
        let (header, rows) = table(&models.join(format!("r0_b{b}_loss.csv")));
        assert_eq!(header[0], "epoch");
        assert_eq!(rows.len(), 2);
    }
    assert_eq!(fs::read_dir(&models).unwrap().count(), 200);
    let (_, batches) = table(&run.join("batches.csv"));
    assert_eq!(batches.len(), 100);
}

#[test]
fn report_matches_independent_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&["gen-data", "--grid", "12x12", "--seed", "1", "--out", p(&data)]);
    ok(&[
        "train", "--data", p(&data), "--model", "naive-2", "--clusters", "8", "--batches", "4", "--repetitions",
        "5", "--seed", "9", "--out", p(&run),
    ]);

    // Re-scoring the predictions reproduces the per-node metrics.
    let scored = dir.path().join("scored.csv");
    ok(&["evaluate", "--data", p(&data), "--predictions", p(&run.join("predictions.csv")), "--out", p(&scored)]);
    assert_eq!(fs::read_to_string(&scored).unwrap(), fs::read_to_string(run.join("node_metrics.csv")).unwrap());

    let merged = dir.path().join("merged.csv");
    ok(&["report", p(&scored), "--out", p(&merged)]);

    // Node means per repetition, then mean / median / SEM over repetitions.
    let (header, rows) = table(&scored);
    let mut per_rep: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for r in &rows {
        per_rep
            .entry(r[0].clone())
            .or_default()
            .push(r[3..].iter().map(|v| v.parse().unwrap()).collect());
    }
    assert_eq!(per_rep.len(), 5);
    let (_, reported) = table(&merged);
    for (m, name) in header[3..].iter().enumerate() {
        let mut reps: Vec<f64> = per_rep
            .values()
            .map(|nodes| nodes.iter().map(|n| n[m]).sum::<f64>() / nodes.len() as f64)
            .collect();
        let n = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / n;
        let sd = (reps.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        reps.sort_by(f64::total_cmp);
        let expect = [mean, reps[2], sd / n.sqrt()];
        let row = reported.iter().find(|r| &r[0] == name).unwrap();
        for (got, want) in row[1..].iter().zip(expect) {
            let got: f64 = got.parse().unwrap();
            assert!((got - want).abs() < 1e-12, "{name}: {got} vs {want}");
        }
    }
    assert_eq!(fs::read_to_string(&merged).unwrap(), fs::read_to_string(run.join("metrics.csv")).unwrap());
}

#[test]
fn sequential_batch_times_sum_to_training_time() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&["gen-data", "--grid", "12x12", "--seed", "2", "--out", p(&data)]);
    ok(&[
        "train", "--data", p(&data), "--model", "gcn-no-adv", "--clusters", "6", "--batches", "3", "--epochs", "60",
        "--parallel", "1", "--no-checkpoints", "--out", p(&run),
    ]);
    let (_, batches) = table(&run.join("batches.csv"));
    let summed: f64 = batches.iter().map(|r| r[6].parse::<f64>().unwrap()).sum();
    let (header, runs) = table(&run.join("runs.csv"));
    let col = header.iter().position(|h| h == "training_seconds").unwrap();
    let total: f64 = runs[0][col].parse().unwrap();
    assert!((summed - total).abs() <= 0.05 * total, "batches {summed}s vs total {total}s");
    assert!(!run.join("models").exists());
}

#[test]
fn embed_writes_one_row_per_segment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--grid", "4x4", "--seed", "5", "--out", p(&data)]);
    let emb = dir.path().join("emb.csv");
    ok(&["embed", "--data", p(&data), "--mode", "sequence-manipulation", "--dims", "8", "--out", p(&emb)]);
    let (header, rows) = table(&emb);
    let (_, segments) = table(&data.join("segments.csv"));
    assert_eq!(rows.len(), segments.len());
    // 8 topology dims plus 32 per feature column.
    assert_eq!(header.len(), 1 + 8 + 4 * 32);
}

#[test]
fn config_file_runs_an_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("exp.conf");
    fs::write(
        &config,
        "dataset = synthetic\ngrid = 6x6\nmodel = naive-1\nclusters = 4\nbatches = 2\nrepetitions = 2\nseed = 4\n",
    )
    .unwrap();
    let stdout = ok(&["run", "--config", p(&config), "--out", p(&out)]);
    assert!(stdout.contains("intersection"));
    assert!(out.join("report.json").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&["gen-data", "--grid", "5x5", "--seed", "3", "--out", p(&data)]);

    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["train", "--data", p(&data), "--out", p(d), "--model", "gcn-huge"]), 1);
    assert_eq!(code(&["gen-data", "--grid", "5by5", "--out", p(d)]), 1);
    assert_eq!(
        code(&["train", "--data", p(&data), "--clusters", "2", "--batches", "3", "--out", p(&d.join("r"))]),
        1
    );
    assert_eq!(code(&["partition", "--data", p(&d.join("missing")), "--clusters", "2"]), 2);

    let config = d.join("bad.conf");
    fs::write(&config, "model = naive-1\nclusters = many\n").unwrap();
    let out = speedhist(&["run", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.conf:2"));

    // Without a speed-limit column the per-limit baseline cannot train.
    let segments = data.join("segments.csv");
    let text = fs::read_to_string(&segments).unwrap().replacen("cat:speed_limit", "cat:limit", 1);
    fs::write(&segments, text).unwrap();
    assert_eq!(code(&["train", "--data", p(&data), "--model", "naive-2", "--out", p(&d.join("r2"))]), 3);
}

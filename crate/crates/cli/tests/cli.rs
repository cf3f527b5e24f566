use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use spectral_bench::data::save_csv;
use spectral_bench::{LabeledDataset, Rng};
use spectral_bench_cli::ExperimentReport;

/// Two noisy classes on a 40-point grid; class "pos" has a raised bump.
fn synthetic(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = Rng::new(seed);
    let len = 40;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % 2;
        rows.push(
            (0..len)
                .map(|j| {
                    let bump = (-((j as f64 - 20.0) / 4.0).powi(2)).exp();
                    (j as f64 / 7.0).sin() + c as f64 * bump + 0.05 * rng.normal()
                })
                .collect(),
        );
        labels.push(c);
    }
    let grid = (0..len).map(|j| 1000.0 + 2.0 * j as f64).collect();
    let data = LabeledDataset::new(grid, rows, labels, vec!["neg".into(), "pos".into()]).unwrap();
    let path = dir.join(format!("synthetic{n}.csv"));
    save_csv(&data, &path).unwrap();
    path
}

fn bin() -> Command {
    Command::cargo_bin("spectral-bench").unwrap()
}

fn knn_cv(data: &Path, out: &Path) -> Command {
    let mut cmd = bin();
    cmd.args(["cv", "--algo", "knn", "--param", "k_neighbors=1", "--no-sg", "--k", "5"])
        .arg("--data")
        .arg(data)
        .arg("--out")
        .arg(out);
    cmd
}

fn load_report(dir: &Path) -> ExperimentReport {
    ExperimentReport::load(&dir.join("report.json")).unwrap()
}

#[test]
fn knn_smoke_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 20, 1);
    let out = tmp.path().join("run");
    knn_cv(&data, &out).assert().success();
    for f in ["report.json", "folds.csv", "model.ckpt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    for i in 0..5 {
        assert!(out.join(format!("confusion_fold{i}.csv")).is_file());
    }
    let r = load_report(&out);
    let res = &r.body.results;
    assert_eq!(res.fold_accuracies.len(), 5);
    assert!(res.specificity_mean.is_some() && res.sensitivity_mean.is_some());
    assert_eq!(r.run.train_seconds.len(), 5);
    assert_eq!(r.body.config.seed, 42);
    assert_eq!(r.body.dataset.samples, 20);
    let folds = fs::read_to_string(out.join("folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 6);
}

#[test]
fn repeated_runs_have_identical_bodies() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 30, 2);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    knn_cv(&data, &a).assert().success();
    knn_cv(&data, &b).env("SPECTRAL_BENCH_THREADS", "1").assert().success();
    let body = |d: &Path| {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
        serde_json::to_string(&v["body"]).unwrap()
    };
    assert_eq!(body(&a), body(&b));
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 20, 3);
    let out = tmp.path().join("run");
    knn_cv(&data, &out).assert().success();
    knn_cv(&data, &out).assert().code(2);
    knn_cv(&data, &out).arg("--force").assert().success();
}

#[test]
fn failures_leave_no_output_and_use_stable_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "900,901,label\n0.1,x,A\n0.2,0.3,B\n").unwrap();
    let out = tmp.path().join("run");
    knn_cv(&bad, &out).assert().code(3);
    assert!(!out.exists());
    knn_cv(&tmp.path().join("missing.csv"), &out).assert().code(3);

    let data = synthetic(tmp.path(), 20, 4);
    knn_cv(&data, &out).args(["--k", "1"]).assert().code(2);
    knn_cv(&data, &out).args(["--param", "bogus=1"]).assert().code(2);
    knn_cv(&data, &out).env("SPECTRAL_BENCH_THREADS", "zero").assert().code(2);
    // k_neighbors larger than a training fold fails inside the run.
    knn_cv(&data, &out).args(["--param", "k_neighbors=19"]).assert().code(2);
    assert!(!out.exists());
    // The default SG window does not fit 5-point spectra.
    let short = tmp.path().join("short.csv");
    fs::write(&short, "1,2,3,4,5,label\n1,2,3,4,5,A\n1,2,3,4,6,B\n2,2,3,4,5,A\n1,3,3,4,6,B\n").unwrap();
    bin().args(["cv", "--algo", "knn", "--k", "2"]).arg("--data").arg(&short).arg("--out").arg(&out).assert().code(3);
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".spectral-bench-"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn nested_cv_records_chosen_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 40, 5);
    let grid = tmp.path().join("grid.json");
    fs::write(&grid, r#"{"axes":[{"name":"k_neighbors","values":[1,3,5]}]}"#).unwrap();
    let out = tmp.path().join("nested");
    bin()
        .args(["nested-cv", "--algo", "knn", "--no-sg"])
        .arg("--data")
        .arg(&data)
        .arg("--grid")
        .arg(&grid)
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let r = load_report(&out);
    for f in &r.body.results.folds {
        assert!(f.params.is_some());
        assert_eq!(f.inner_scores.as_ref().unwrap().len(), 3);
    }
    assert!(r.body.results.representative_params.is_some());
    let folds = fs::read_to_string(out.join("folds.csv")).unwrap();
    assert!(folds.contains("k_neighbors="));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 24, 6);
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            r#"
dataset = "{}"
out = "{}"
k = 3
seed = 7
embed = true

[preprocessing]
kind = "sg"
window = 5
degree = 2
deriv = 1

[algorithm]
name = "plsda"
config = {{ variance_target = 0.9 }}
"#,
            data.display(),
            tmp.path().join("from-file").display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("flagged");
    bin().args(["cv", "--seed", "8"]).arg("--config").arg(&cfg).arg("--out").arg(&out).assert().success();
    let r = load_report(&out);
    assert_eq!(r.body.config.k, 3);
    assert_eq!(r.body.config.seed, 8);
    assert_eq!(r.body.config.preprocessing.label(), "sg(5,2,1)");
    assert_eq!(r.body.config.algorithm.name(), "plsda");
    let embed = fs::read_to_string(out.join("embed.csv")).unwrap();
    assert!(embed.starts_with("# t-SNE perplexity="));
    assert_eq!(embed.lines().filter(|l| !l.starts_with('#')).count(), 25);
}

#[test]
fn compare_tabulates_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 20, 7);
    let a = tmp.path().join("raw");
    let b = tmp.path().join("sg");
    knn_cv(&data, &a).assert().success();
    bin()
        .args(["cv", "--algo", "knn", "--window", "5", "--degree", "2", "--deriv", "0"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&b)
        .assert()
        .success();
    let csv = tmp.path().join("table.csv");
    let output = bin()
        .arg("compare")
        .arg(a.join("report.json"))
        .arg(b.join("report.json"))
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(output.status.success());
    let table = String::from_utf8(output.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("sg(5,2,0)") && table.contains("none"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let single = spectral_bench_cli::compare(&[a.join("report.json")]).unwrap();
    assert_eq!(single.rows.len(), 1);

    let old = tmp.path().join("old.json");
    let text = fs::read_to_string(a.join("report.json")).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 0", 1);
    fs::write(&old, text).unwrap();
    let err = bin().arg("compare").arg(&old).output().unwrap();
    assert_eq!(err.status.code(), Some(1));
    let msg = String::from_utf8(err.stderr).unwrap();
    assert!(msg.contains("version 0") && msg.contains("expected 1"), "{msg}");
}

#[test]
fn train_predict_and_dump_features() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 20, 8);
    let cfg = tmp.path().join("cnn.toml");
    fs::write(
        &cfg,
        r#"
[algorithm]
name = "cnn"
config = { conv_blocks = [{ out_channels = 4, kernel_size = 5, pool_size = 2 }], dense_hidden = [8], epochs = 150, batch_size = 4, learning_rate = 0.005 }
"#,
    )
    .unwrap();
    let model = tmp.path().join("model.ckpt");
    bin()
        .args(["train", "--window", "5", "--degree", "2", "--deriv", "0"])
        .arg("--config")
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .assert()
        .success();
    let preds = tmp.path().join("preds.csv");
    let feats = tmp.path().join("features.csv");
    let out = bin()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&preds)
        .arg("--dump-features")
        .arg(&feats)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stderr).unwrap().contains("accuracy 1.0000"));
    let text = fs::read_to_string(&preds).unwrap();
    assert!(text.starts_with("index,label,predicted,score_neg,score_pos"));
    assert_eq!(text.lines().count(), 21);
    let dumped = spectral_bench::load_csv(&feats).unwrap();
    assert_eq!(dumped.len(), 20);
    assert_eq!(dumped.num_features(), 8);

    let embedded = tmp.path().join("embed.csv");
    bin()
        .args(["embed", "--perplexity", "5", "--iterations", "300"])
        .arg(&feats)
        .arg(&embedded)
        .assert()
        .success();
    assert!(fs::read_to_string(&embedded).unwrap().contains("x,y,label"));

    let knn = tmp.path().join("knn.ckpt");
    bin().args(["train", "--algo", "knn", "--no-sg"]).arg("--data").arg(&data).arg("--model").arg(&knn).assert().success();
    bin()
        .arg("predict")
        .arg("--model")
        .arg(&knn)
        .arg("--data")
        .arg(&data)
        .arg("--dump-features")
        .arg(tmp.path().join("nope.csv"))
        .assert()
        .code(2);
}

#[test]
fn preprocess_writes_filtered_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic(tmp.path(), 10, 9);
    let out = tmp.path().join("filtered.csv");
    bin().arg("preprocess").arg(&data).arg(&out).assert().success();
    let filtered = spectral_bench::load_csv(&out).unwrap();
    let raw = spectral_bench::load_csv(&data).unwrap();
    assert_eq!(filtered.grid(), raw.grid());
    assert_eq!(filtered.labels(), raw.labels());
    assert_ne!(filtered.rows(), raw.rows());
    bin().arg("preprocess").arg(&data).arg(&out).args(["--window", "4"]).assert().code(2);
}

//! End-to-end tests of the `ccdsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ccdsim::checkpoint;
use ccdsim::sweep::parse_sweep;
use serde_json::Value;
use tempfile::TempDir;

fn ccdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccdsim")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ccdsim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"
[model]
hidden = [16]
[dp]
mechanism = "gaussian"
epsilon = 0.5
learning_rate = 0.05
[federation]
clusters = 3
per_cluster = 100
rounds = 12
batch_size = 32
eval_every = 4
tail_window = 8
[data]
train_size = 500
test_size = 200
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn gen_data_sizes_and_replay() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["gen-data", "--out", p(&a), "--per-class", "10", "--seed", "4"]);
    ok(&["gen-data", "--out", p(&b), "--per-class", "10", "--seed", "4"]);
    ok(&["gen-data", "--out", p(&c), "--per-class", "10", "--seed", "5"]);
    let train = fs::read_to_string(a.join("train.csv")).unwrap();
    assert_eq!(data_rows(&train).len(), 50);
    assert!(train.starts_with("# schema_version: 1\n# config: "));
    for f in ["train.csv", "test.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("train.csv")).unwrap(), fs::read(c.join("train.csv")).unwrap());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train_rows"], 50);
    assert_eq!(manifest["config"]["seed"], 4);
}

#[test]
fn run_writes_all_outputs_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let (r1, r2, r3) = (dir.path().join("r1"), dir.path().join("r2"), dir.path().join("r3"));
    ok(&["run", "--config", &cfg, "--out", p(&r1), "--threads", "1"]);
    ok(&["run", "--config", &cfg, "--out", p(&r2), "--threads", "1"]);
    ok(&["run", "--config", &cfg, "--out", p(&r3), "--threads", "4"]);
    for f in ["metrics.csv", "confusion.csv", "model.ckpt"] {
        let a = fs::read(r1.join(f)).unwrap();
        assert_eq!(a, fs::read(r2.join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(r3.join(f)).unwrap(), "{f} across thread counts");
    }
    let metrics = fs::read_to_string(r1.join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(2).unwrap() == "iteration,accuracy,precision,recall,mean_loss");
    assert_eq!(data_rows(&metrics).len(), 3);
    assert!(!metrics.contains('\r'));
    let timing = fs::read_to_string(r1.join("timing.csv")).unwrap();
    assert_eq!(data_rows(&timing).len(), 3);

    let summary: Value = serde_json::from_str(&fs::read_to_string(r1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config"]["dp"]["epsilon"], 0.5);
    assert_eq!(summary["noise"]["mechanism"], "gaussian");
    assert_eq!(summary["budgets"]["parallel"]["epsilon_bar"], 0.5);
    assert_eq!(summary["budgets"]["naive_sequential"]["epsilon_bar"], 18.0);
    assert!(summary["budgets"]["advanced"]["epsilon_bar"].as_f64().unwrap() > 0.5);
    assert!(summary["total_elapsed_ms"].as_f64().unwrap() >= 0.0);

    let (params, meta) = checkpoint::decode(&fs::read(r1.join("model.ckpt")).unwrap()).unwrap();
    assert_eq!(params.shape().sizes(), &[21, 16, 5]);
    assert!(meta.contains("\"schema_version\":1"));

    let confusion = fs::read_to_string(r1.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().nth(2).unwrap(), "true\\predicted,normal,DoS,FoT,BP,MitM");
    let total: u64 = data_rows(&confusion)
        .iter()
        .flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()))
        .sum();
    assert_eq!(total, 200);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", p(&a)]);
    ok(&["run", "--config", &cfg, "--out", p(&b), "--seed", "9"]);
    let ma = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let mb = fs::read_to_string(b.join("metrics.csv")).unwrap();
    assert_ne!(ma, mb);
    assert!(mb.contains("\"seed\":9"));
}

#[test]
fn invalid_epsilon_is_a_named_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("epsilon = 0.5", "epsilon = -1"));
    let out = ccdsim(&["run", "--config", &cfg, "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dp.epsilon"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = ccdsim(&["run", "--config", p(&missing), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    let diverge = SMALL
        .replace("mechanism = \"gaussian\"", "mechanism = \"none\"")
        .replace("learning_rate = 0.05", "learning_rate = 1e300\nclip_norm = 1e300");
    let cfg = write(dir.path(), "div.toml", &diverge);
    let out = ccdsim(&["run", "--config", &cfg, "--out", p(&dir.path().join("d"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("round"));

    assert_eq!(ccdsim(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(ccdsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn accountant_budgets() {
    let out = ok(&["accountant", "--epsilon", "0.5", "--delta", "1e-5", "--clusters", "3", "--rounds", "1000", "--delta-slack", "1e-5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let adv = v["advanced"]["epsilon_bar"].as_f64().unwrap();
    assert!((adv - 1045.6).abs() < 0.05, "{adv}");
    assert!((v["advanced"]["delta_bar"].as_f64().unwrap() - 0.03001).abs() < 1e-12);
    assert_eq!(v["naive_sequential"]["epsilon_bar"], 1500.0);
    assert_eq!(v["parallel"]["epsilon_bar"], 0.5);

    let out = ok(&["accountant", "--epsilon", "0.3", "--clusters", "1", "--rounds", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["parallel"], v["naive_sequential"]);

    let out = ccdsim(&["accountant", "--epsilon", "0.5", "--clusters", "100", "--rounds", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["advanced"]["error"].is_string());
}

const SWEEP: &str = r#"
[sweep]
mechanisms = ["gaussian", "laplace", "moments_accountant"]
epsilons = [0.5, 10]
clusters = [2, 3]
repetitions = 2
"#;

#[test]
fn sweep_grid_report_and_replay() {
    let dir = TempDir::new().unwrap();
    let base = SMALL.replace("rounds = 12", "rounds = 4");
    let cfg = write(dir.path(), "sweep.toml", &format!("{base}{SWEEP}"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["sweep", "--config", &cfg, "--out", p(&a)]);
    ok(&["sweep", "--config", &cfg, "--out", p(&b), "--threads", "3"]);
    let text = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(b.join("sweep.csv")).unwrap());

    let rows = parse_sweep(&text, "sweep.csv").unwrap();
    assert_eq!(rows.len(), 24);
    assert_eq!(rows.iter().filter(|r| r.seed == 0).count(), 12);
    assert!(rows.iter().all(|r| r.ok));
    let keys: Vec<_> = rows.iter().map(|r| (r.mechanism.name(), r.epsilon.0.to_bits(), r.clusters, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by_key(|k| (["none", "gaussian", "laplace", "moments_accountant"].iter().position(|m| *m == k.0), k.1, k.2, k.3));
    assert_eq!(keys, sorted);
    let timing = fs::read_to_string(a.join("sweep_timing.csv")).unwrap();
    assert_eq!(data_rows(&timing).len(), 24);

    let report = dir.path().join("report.csv");
    ok(&["report", "--input", p(&a.join("sweep.csv")), "--out", p(&report)]);
    let rep = fs::read_to_string(&report).unwrap();
    let lines = data_rows(&rep);
    assert_eq!(lines.len(), 12);
    // mean of the two seeds, recomputed from the sweep rows
    let first: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(&first[..5], &["gaussian", "0.5", "2", "2", "0"]);
    let want = rows
        .iter()
        .filter(|r| r.mechanism.name() == "gaussian" && r.epsilon.0 == 0.5 && r.clusters == 2)
        .map(|r| r.accuracy)
        .sum::<f64>()
        / 2.0;
    assert!((first[5].parse::<f64>().unwrap() - want).abs() < 1e-15);
}

#[test]
fn degenerate_sweep_matches_run() {
    let dir = TempDir::new().unwrap();
    let sweep = "[sweep]\nmechanisms = [\"gaussian\"]\nepsilons = [0.5]\nclusters = [3]\nrepetitions = 1\n";
    let cfg = write(dir.path(), "sweep.toml", &format!("{SMALL}{sweep}"));
    let run_cfg = write(dir.path(), "run.toml", SMALL);
    let (s, r) = (dir.path().join("s"), dir.path().join("r"));
    ok(&["sweep", "--config", &cfg, "--out", p(&s)]);
    ok(&["run", "--config", &run_cfg, "--out", p(&r)]);
    let cell = s.join("cells").join("gaussian_eps0.5_n3_seed0");
    for f in ["metrics.csv", "confusion.csv", "model.ckpt"] {
        assert_eq!(fs::read(cell.join(f)).unwrap(), fs::read(r.join(f)).unwrap(), "{f}");
    }
    let rows = parse_sweep(&fs::read_to_string(s.join("sweep.csv")).unwrap(), "s").unwrap();
    let summary: Value = serde_json::from_str(&fs::read_to_string(r.join("summary.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].accuracy, summary["tail"]["accuracy"].as_f64().unwrap());
}

#[test]
fn failing_cells_are_recorded() {
    let dir = TempDir::new().unwrap();
    let sweep = "[sweep]\nmechanisms = [\"none\"]\nepsilons = [\"inf\"]\nclusters = [3, 50]\n";
    let cfg = write(dir.path(), "sweep.toml", &format!("{SMALL}{sweep}"));
    let out = dir.path().join("o");
    ok(&["sweep", "--config", &cfg, "--out", p(&out)]);
    let rows = parse_sweep(&fs::read_to_string(out.join("sweep.csv")).unwrap(), "s").unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ok);
    assert!(!rows[1].ok);
    assert!(rows[1].accuracy.is_nan());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.contains("insufficient samples"));
}

#[test]
fn csv_data_round_trip_through_run() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--out", p(&data), "--per-class", "80", "--test-per-class", "20"]);
    let cfg = SMALL.replace(
        "[data]\ntrain_size = 500\ntest_size = 200\n",
        "[data]\nsource = \"csv\"\ntrain = \"data/train.csv\"\ntest = \"data/test.csv\"\n",
    );
    let cfg = write(dir.path(), "csv.toml", &cfg);
    let out = dir.path().join("o");
    ok(&["run", "--config", &cfg, "--out", p(&out)]);
    let codes = fs::read_to_string(out.join("codes.csv")).unwrap();
    assert_eq!(data_rows(&codes).len(), 0, "synthetic categorical columns are numeric");
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["data"]["source"], "csv");
}

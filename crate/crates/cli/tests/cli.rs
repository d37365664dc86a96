use std::path::Path;
use std::process::{Command, Output};

use psfield::io::{load_model, read_json, HISTORY_HEADER, METRICS_HEADER};
use psfield::trainer::TrainConfig;
use tempfile::TempDir;

fn psfield(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psfield"))
        .args(args)
        .current_dir(dir)
        .env_remove("PSFIELD_THREADS")
        .env_remove("PSFIELD_DETERMINISTIC")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = psfield(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(
        &["synth", "--resolution", "24", "--lights", "6", "--seed", "7", "--shadow-samples", "32", "--out", "scene"],
        dir,
    );
}

const QUICK_TRAIN: [&str; 8] = ["--epochs", "2", "--warmup", "1", "--tiny", "--pixel-batch", "64", "--scene"];

fn train(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["train"];
    args.extend(QUICK_TRAIN);
    args.extend(["scene", "--out", out]);
    args.extend(extra);
    ok(&args, dir);
}

#[test]
fn synth_train_eval_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir);
    assert!(dir.join("scene/scene.json").exists());
    assert!(dir.join("scene/images/005.pfm").exists());
    train(dir, "run", &[]);
    let stdout = ok(&["eval", "--run", "run", "--scene", "scene"], dir);
    let metrics = std::fs::read_to_string(dir.join("run/metrics.csv")).unwrap();
    assert_eq!(stdout, metrics);
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    let history = std::fs::read_to_string(dir.join("run/history.csv")).unwrap();
    assert!(history.starts_with(HISTORY_HEADER));
    assert_eq!(history.lines().count(), 3);
    assert!(history.lines().skip(1).all(|l| l.starts_with(row[0])));
    assert!(row[2].parse::<f64>().unwrap().is_finite());
}

#[test]
fn sparse_and_ablation_flags_reach_the_config() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir);
    train(dir, "sparse", &["--sparse", "--ablate", "no-shadow-to-light"]);
    let cfg: TrainConfig = read_json(&dir.join("sparse/config.json")).unwrap();
    assert!(cfg.sparse);
    assert!(cfg.ablation.cut_shadow_to_light);
    assert!(!cfg.ablation.cut_specular_to_light);
    assert_eq!(cfg.field_config().levels, 6);
    let model = load_model(&dir.join("sparse")).unwrap();
    assert_eq!(model.fields.config.levels, 6);
    let history = std::fs::read_to_string(dir.join("sparse/history.csv")).unwrap();
    let warmup: Vec<&str> = history.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(warmup[2], "warmup");
    assert_eq!(warmup[5], "", "azimuth term present in sparse mode");
}

#[test]
fn same_seed_gives_identical_history() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir);
    train(dir, "a", &["--seed", "4"]);
    train(dir, "b", &["--seed", "4"]);
    let a = std::fs::read(dir.join("a/history.csv")).unwrap();
    let b = std::fs::read(dir.join("b/history.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn baseline_render_and_inspect_write_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth(dir);
    train(dir, "run", &[]);
    ok(&["baseline", "--scene", "scene", "--out", "base"], dir);
    assert!(dir.join("base/normals.pfm").exists());
    assert!(dir.join("base/metrics.csv").exists());
    ok(&["render", "--run", "run", "--scene", "scene", "--out", "rend"], dir);
    assert!(dir.join("rend/images/005.pfm").exists());
    assert!(dir.join("rend/shadows/005.pgm").exists());
    let out = psfield(
        &["render", "--run", "run", "--scene", "scene", "--light", "-0.2,0.1,1", "--out", "one"],
        dir,
    );
    assert!(out.status.success());
    assert!(dir.join("one/images/000.pfm").exists());
    assert!(!dir.join("one/images/001.pfm").exists());
    let stdout = ok(&["inspect", "--run", "run", "--scene", "scene", "--point", "12,12", "--out", "insp"], dir);
    assert!(stdout.contains("max channel similarity"));
    assert!(dir.join("insp/brdf/12_12.pfm").exists());
    assert!(dir.join("insp/albedo.pfm").exists());
    let table = std::fs::read_to_string(dir.join("insp/correlation.csv")).unwrap();
    assert!(table.starts_with("channel,direction,intensity,degenerate"));
}

#[test]
fn gbr_reports_invariance() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(&["gbr", "--resolution", "24", "--lights", "6", "--out", "pseudo"], tmp.path());
    let diff: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("max_abs_diff "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff < 1e-9);
    assert!(tmp.path().join("pseudo/scene.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let unknown = psfield(&["train", "--bogus"], dir);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(psfield(&["frobnicate"], dir).status.code(), Some(2));
    let missing = psfield(&["eval", "--run", "nowhere", "--scene", "nowhere"], dir);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("model.json"));
    assert_eq!(psfield(&["gbr", "--resolution", "24", "--lambda", "0"], dir).status.code(), Some(2));
    assert_eq!(psfield(&["synth", "--resolution", "4", "--out", "s"], dir).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_psfield"))
        .args(["synth", "--out", "s"])
        .current_dir(dir)
        .env("PSFIELD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    synth(dir);
    let bad_epochs = psfield(&["train", "--scene", "scene", "--out", "r", "--epochs", "0", "--tiny"], dir);
    assert_eq!(bad_epochs.status.code(), Some(2));
}

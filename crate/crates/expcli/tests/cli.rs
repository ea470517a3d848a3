use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdntk_cli::config::ExperimentConfig;
use kdntk_cli::record::{read_csv, Manifest, COLUMNS};

const MINIMAL: &str = r#"
experiment = "effective-logits"
seed = 11

[options]
z_points = 5

[[distill]]
rho = 0.5
T = 2.0

[[distill]]
rho = 0.0
T = 1.0
"#;

fn kdntk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdntk")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// CSV text with the wall-time column blanked.
fn without_wall_time(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn validate_accepts_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let out = kdntk(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("OK: effective-logits"));
}

#[test]
fn out_of_range_rho_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &MINIMAL.replace("rho = 0.5", "rho = 1.5"));
    for sub in ["validate", "effective-logits"] {
        let out = kdntk(&[sub, "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1));
        let err = stderr(&out);
        assert!(err.contains("distill[0]") && err.contains("rho"), "{err}");
    }
    assert!(!dir.path().join("effective-logits.csv").exists());
}

#[test]
fn parse_errors_carry_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{MINIMAL}\n[options]\nz_points = \"many\"\n"));
    let out = kdntk(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn huge_grid_warns_about_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &MINIMAL.replace("seed = 11", "seed = 11\nn_grid = [10, 100000]"));
    let out = kdntk(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let err = stderr(&out);
    assert!(err.contains("warning") && err.contains("cost"), "{err}");
}

#[test]
fn mismatched_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let out = kdntk(&["risk", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("experiment"));
}

#[test]
fn run_writes_csv_and_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let out_dir = dir.path().join("out");
    let out = kdntk(&["effective-logits", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let csv_path = out_dir.join("effective-logits.csv");
    let header = std::fs::read_to_string(&csv_path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, COLUMNS.join(","));
    let rows = read_csv(&csv_path).unwrap();
    // 2 entries × 2 labels × 5 logits × (z_eff, p_eff).
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().filter(|r| r.rho == Some(0.0)).all(|r| r.has_flag("saturated")));
    assert!(rows.iter().filter(|r| r.rho == Some(0.5)).all(|r| r.flag.is_empty()));

    let manifest = Manifest::read(&out_dir.join("effective-logits.manifest.json")).unwrap();
    assert!(manifest.complete && manifest.error.is_none());
    assert_eq!(manifest.rows, 40);
    assert_eq!(manifest.root_seed, 11);
    assert_eq!(&manifest.config_hash[..16], rows[0].config_hash);
}

#[test]
fn json_format_holds_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let out = kdntk(&[
        "effective-logits",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("effective-logits.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 40);
    assert_eq!(rows[0]["experiment"], "effective-logits");
    assert!(rows[0]["n"].is_null());
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "inefficiency"
seed = 5
n_grid = [4, 8, 12]
repeats = 3

[student]
input_dim = 2
hidden_layers = 2
width = 1

[[tasks]]
input_dim = 2
target = { kind = "mixture", mixture = { q = 3 } }

[[tasks]]
input_dim = 2
target = { kind = "random-labels" }
"#;
    let cfg = write_config(dir.path(), "c.toml", text);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3", "1"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = kdntk(&[
            "inefficiency",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        outputs.push(without_wall_time(&out_dir.join("inefficiency.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    kdntk(&["effective-logits", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    kdntk(&["effective-logits", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "12"]);
    let ra = read_csv(&a.join("effective-logits.csv")).unwrap();
    let rb = read_csv(&b.join("effective-logits.csv")).unwrap();
    assert!(rb.iter().all(|r| r.seed == 12));
    assert_ne!(ra[0].config_hash, rb[0].config_hash);
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "ntk-check"
seed = 3
trials = 2

[student]
input_dim = 2
hidden_layers = 2
width = 8

[options]
widths = [16, 64]
kernel_points = 6
ratio_norms = [10.0]
"#;
    let cfg = write_config(dir.path(), "c.toml", text);
    let first = dir.path().join("first");
    let out = kdntk(&["ntk-check", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest = Manifest::read(&first.join("ntk-check.manifest.json")).unwrap();
    let rebuilt: ExperimentConfig = serde_json::from_value(manifest.config).unwrap();
    let cfg2 = write_config(dir.path(), "rebuilt.toml", &toml::to_string(&rebuilt).unwrap());
    let second = dir.path().join("second");
    let out = kdntk(&["ntk-check", "--config", cfg2.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        without_wall_time(&first.join("ntk-check.csv")),
        without_wall_time(&second.join("ntk-check.csv"))
    );
}

#[test]
fn numerical_failure_keeps_completed_rows() {
    let dir = tempfile::tempdir().unwrap();
    // An absurd reduction factor overflows the correction logits after the
    // hard-label student row has been written.
    let text = r#"
experiment = "hard-label-effect"
seed = 9
n_grid = [6]

[student]
input_dim = 2
hidden_layers = 1
width = 1

[teacher]
input_dim = 2
hidden_layers = 1
width = 8

[teacher_training]
learning_rate = 0.01
batch_size = 16
epochs = 2
online_batch = true

[task]
input_dim = 2
target = { kind = "mixture", mixture = { q = 2 } }

[[distill]]
rho = 1.0
T = 1.0

[options]
reduction = 1e9
checkpoints = [1, 2]
test_points = 50
probe_points = 200
"#;
    let cfg = write_config(dir.path(), "c.toml", text);
    let out = kdntk(&["hard-label-effect", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("hard-label-effect.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].value_name, "student_hard_accuracy");
    let manifest = Manifest::read(&dir.path().join("hard-label-effect.manifest.json")).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.error.unwrap().contains("overflow"));
}

#[test]
fn network_ground_truth_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "hard-label-effect"
seed = 4
n_grid = [8]

[student]
input_dim = 2
hidden_layers = 1
width = 1

[teacher]
input_dim = 2
hidden_layers = 1
width = 8

[teacher_training]
learning_rate = 0.01
batch_size = 16
epochs = 3
online_batch = true

[task]
input_dim = 2
target = { kind = "mixture", mixture = { q = 2 } }

[[distill]]
rho = 1.0
T = 2.0

[options]
truth_epochs = 3
checkpoints = [1, 3]
test_points = 50
probe_points = 200
"#;
    let cfg = write_config(dir.path(), "c.toml", text);
    let out = kdntk(&["hard-label-effect", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("hard-label-effect.csv")).unwrap();
    assert_eq!(rows.len(), 1 + 2 * 4);
    assert!(rows.iter().all(|r| r.value.is_finite()));
    let zero = cfg.to_str().unwrap().replace("c.toml", "z.toml");
    std::fs::write(&zero, text.replace("truth_epochs = 3", "truth_epochs = 0")).unwrap();
    assert_eq!(kdntk(&["validate", "--config", &zero]).status.code(), Some(1));
}

#[test]
fn missing_config_flag_is_an_error() {
    let out = kdntk(&["validate"]);
    assert_eq!(out.status.code(), Some(1));
}

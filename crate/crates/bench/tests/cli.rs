use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixest_bench::record::ExperimentRecord;

fn mixest() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixest"));
    cmd.env_remove("MIXEST_SEED");
    cmd
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixest-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(dir: &Path, formats: &str) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!(
            r#"
name = "small"
seed = 5
n = 200
trials = 3
checkpoints = [1, 2, 5, 10, 20, 50, 100, 200]
metrics = ["kl_vs_best_in_class", "l2_vs_best_in_class"]
formats = {formats}
[target]
kind = "categorical"
pmf = [0.6, 0.3, 0.1]
[dictionary]
kind = "categorical"
epsilon = 0.3
[[estimators]]
name = "exp_smd"
schedule = {{ kind = "strongly_convex" }}
[[estimators]]
name = "sgd"
mirror = "euclidean"
schedule = {{ kind = "strongly_convex" }}
"#
        ),
    )
    .unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn mixest")
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn csv_only_writes_one_file_with_the_schema_header() {
    let dir = temp_dir("csv");
    let config = small_config(&dir, r#"["csv"]"#);
    let out = dir.join("out");
    let o = run(mixest().arg("run").arg(&config).arg("--out").arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files_in(&out), ["small.csv"]);
    let csv = fs::read_to_string(out.join("small.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("estimator,trial,checkpoint,metric,value"));
    // 2 estimators × 3 trials × 8 checkpoints × 2 metrics.
    assert_eq!(lines.count(), 96);
}

#[test]
fn empty_format_list_writes_nothing() {
    let dir = temp_dir("none");
    let config = small_config(&dir, "[]");
    let out = dir.join("out");
    let o = run(mixest().arg("run").arg(&config).arg("--out").arg(&out));
    assert!(o.status.success());
    assert!(files_in(&out).is_empty());
}

#[test]
fn svg_has_a_curve_per_estimator_and_bound_overlays() {
    let dir = temp_dir("svg");
    let config = small_config(&dir, r#"["svg", "json"]"#);
    let out = dir.join("out");
    let o = run(mixest().arg("run").arg(&config).arg("--out").arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let kl = fs::read_to_string(out.join("small_kl_vs_best_in_class.svg")).unwrap();
    // exp_smd and sgd mean curves plus the theorem-2 overlay for exp_smd.
    assert_eq!(kl.matches("<polyline").count(), 3);
    assert_eq!(kl.matches("stroke-dasharray").count(), 2);
    assert!(kl.contains(">exp_smd<") && kl.contains(">sgd<") && kl.contains("theorem2 (exp_smd)"));
    let l2 = fs::read_to_string(out.join("small_l2_vs_best_in_class.svg")).unwrap();
    assert!(l2.contains("theorem1 (sgd)"));

    // The record re-plots without rerunning.
    let replot = dir.join("replot");
    let o = run(mixest().arg("plot").arg(out.join("small.json")).arg("--out").arg(&replot));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(replot.join("small_kl_vs_best_in_class.svg")).unwrap(), kl);
}

#[test]
fn record_statistics_are_recomputable() {
    let dir = temp_dir("json");
    let config = small_config(&dir, r#"["json"]"#);
    let out = dir.join("out");
    assert!(run(mixest().arg("run").arg(&config).arg("--out").arg(&out)).status.success());
    let record: ExperimentRecord = serde_json::from_str(&fs::read_to_string(out.join("small.json")).unwrap()).unwrap();
    for s in &record.series {
        for (i, mean) in s.mean.iter().enumerate() {
            let col: Vec<f64> = s.values.iter().map(|row| row[i].0).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            if m.is_finite() {
                assert!((m - mean.0).abs() <= 1e-12 * m.abs().max(1.0));
            } else {
                // A boundary SGD iterate gives KL = inf in some trial.
                assert!(!mean.0.is_finite());
            }
        }
    }
    // Paired streams: every trial has its own checksum, shared by all estimators.
    let sums: Vec<&str> = record.trials.iter().map(|t| t.stream_checksum.as_str()).collect();
    assert_eq!(sums.len(), 3);
    assert!(sums[0] != sums[1] && sums[1] != sums[2]);
}

#[test]
fn seed_env_var_overrides_the_config() {
    let dir = temp_dir("seed");
    let config = small_config(&dir, r#"["csv"]"#);
    let read = |seed: Option<&str>, tag: &str| {
        let out = dir.join(tag);
        let mut cmd = mixest();
        if let Some(s) = seed {
            cmd.env("MIXEST_SEED", s);
        }
        assert!(run(cmd.arg("run").arg(&config).arg("--out").arg(&out)).status.success());
        fs::read_to_string(out.join("small.csv")).unwrap()
    };
    let base = read(None, "a");
    assert_eq!(read(Some("5"), "b"), base);
    assert_ne!(read(Some("6"), "c"), base);
    let o = run(mixest().env("MIXEST_SEED", "abc").arg("run").arg(&config).arg("--out").arg(dir.join("d")));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = temp_dir("bad");
    let bad = dir.join("bad.toml");
    fs::write(&bad, "n = 10\ntrials = 0\n[target]\nkind = \"four_mode\"\n[dictionary]\nkind = \"multiscale_gaussian\"\n")
        .unwrap();
    assert_eq!(run(mixest().arg("run").arg(&bad)).status.code(), Some(2));
    fs::write(&bad, "this is not toml = = =").unwrap();
    assert_eq!(run(mixest().arg("run").arg(&bad)).status.code(), Some(2));
    assert_eq!(run(mixest().arg("frobnicate")).status.code(), Some(2));
}

#[test]
fn unwritable_output_fails_before_running() {
    let dir = temp_dir("unwritable");
    let config = small_config(&dir, r#"["csv"]"#);
    let blocker = dir.join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(mixest().arg("run").arg(&config).arg("--out").arg(blocker.join("sub")));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).is_empty(), "no results should be printed");
}

#[test]
fn verify_theorems_reports_each_check() {
    let dir = temp_dir("verify");
    let path = dir.join("k2.toml");
    fs::write(
        &path,
        r#"
n = 1000
trials = 60
formats = []
[target]
kind = "categorical"
pmf = [0.5, 0.5]
[dictionary]
kind = "categorical"
epsilon = 0.5
[oracles]
nu_probes = 0
"#,
    )
    .unwrap();
    let o = run(mixest().arg("verify-theorems").arg(&path));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);

    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/categorical.toml");
    assert_eq!(run(mixest().arg("verify-theorems").arg(shipped)).status.code(), Some(2));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = temp_dir("sweep");
    let config = small_config(&dir, r#"["csv"]"#);
    let out = dir.join("out");
    let o = run(mixest()
        .arg("--jobs")
        .arg("2")
        .arg("sweep")
        .arg(&config)
        .arg("--param")
        .arg("dictionary.epsilon")
        .arg("--values")
        .arg("0.2,0.4")
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files_in(&out), ["dictionary.epsilon=0.2", "dictionary.epsilon=0.4"]);
    for sub in files_in(&out) {
        let files = files_in(&out.join(&sub));
        assert!(files.len() == 1 && files[0].ends_with(".csv"), "{files:?}");
    }

    let o = run(mixest().arg("sweep").arg(&config).arg("--param").arg("no_such").arg("--values").arg("1"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["fourmode.toml", "categorical.toml", "wide_spikes.toml", "worked_k2.toml"] {
        let c = mixest_bench::ExperimentConfig::from_path(&dir.join(name)).unwrap();
        c.validate().unwrap();
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn swarmorg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmorg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_1D: &str = r#"{"experiment": "self-org-1d", "agents": 120, "dt": 0.001, "seed": 7,
  "iterations": {"k": 300}, "one_d": {"snapshot_iters": [0, 100]}}"#;

const SMALL_2D: &str = r#"{"experiment": "self-org-2d", "agents": 300, "dt": 0.005,
  "two_d": {"pstar_samples": 100, "grid_step": 0.0625, "snapshot_stride": 5}}"#;

#[test]
fn presets_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = swarmorg(&["presets", "list"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["paper-1d", "paper-1d-desk", "paper-2d-desk", "oracle-all"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn one_d_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL_1D).unwrap();
    for dir in ["a", "b"] {
        let out = swarmorg(
            &["run-1d", "--config", "c.json", "--out-dir", dir],
            tmp.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["metrics_1d.csv", "density_1d.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let m = manifest(&tmp.path().join("a"));
    let files: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["metrics_1d.csv", "density_1d.csv"]);
    for f in &files {
        assert!(tmp.path().join("a").join(f).exists());
    }
    assert_eq!(m["seed"], 7);
    assert_eq!(m["iterations"]["k"], 300);
    assert_eq!(m["passed"], true);
    let header = fs::read_to_string(tmp.path().join("a/density_1d.csv")).unwrap();
    assert!(header.starts_with("iter,agent,x,rho,rho_star\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL_1D).unwrap();
    let out = swarmorg(
        &[
            "run-1d",
            "--config",
            "c.json",
            "--seed",
            "99",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["seed"], 99);
    assert_eq!(m["config"]["seed"], 99);
}

#[test]
fn two_d_writes_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL_2D).unwrap();
    let out = swarmorg(
        &[
            "run-2d",
            "--config",
            "c.json",
            "--stage-breakpoints",
            "10,50,10",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("o");
    let m = manifest(&dir);
    assert_eq!(m["iterations"]["k1"], 10);
    assert_eq!(m["iterations"]["k"], 10);
    assert!(m["iterations"]["k2"].as_u64().unwrap() <= 50);
    for f in m["files"].as_array().unwrap() {
        let path = dir.join(f["path"].as_str().unwrap());
        assert!(path.exists(), "{path:?}");
    }
    let stage3 = fs::read_to_string(dir.join("stage3.csv")).unwrap();
    assert!(stage3.starts_with("iter,t,e_rho,energy,kinetic,gradient_fallbacks,contained\n"));
    let boundary = fs::read_to_string(dir.join("boundary_2d.csv")).unwrap();
    // initial, Stage-1 stride, Stage-1 end, Stage-2 end, Stage-3 stride and end
    let stages: std::collections::BTreeSet<&str> = boundary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(stages.into_iter().collect::<Vec<_>>(), ["0", "1", "2", "3"]);
}

#[test]
fn oracle_check_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = swarmorg(&["oracle", "check-hausdorff", "--out-dir", "o"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep: Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("o/oracle_check-hausdorff.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(
        manifest(&tmp.path().join("o"))["checks"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn unknown_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"experiment": "self-org-1d", "agents": 100, "speed": 3}"#,
    )
    .unwrap();
    let out = swarmorg(&["run-1d", "--config", "c.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));
}

#[test]
fn wrong_experiment_still_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL_1D).unwrap();
    let out = swarmorg(
        &["run-2d", "--config", "c.json", "--out-dir", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["passed"], false);
    assert!(m["error"].as_str().unwrap().contains("SelfOrg1d"));
}

#[test]
fn missed_threshold_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL_1D.replace(
        "\"seed\": 7,",
        "\"seed\": 7, \"thresholds\": {\"e_ratio_1d\": 1e-9},",
    );
    fs::write(tmp.path().join("c.json"), cfg).unwrap();
    let out = swarmorg(
        &["run-1d", "--config", "c.json", "--out-dir", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["checks"][0]["name"], "e_ratio_1d");
    assert_eq!(m["checks"][0]["passed"], false);
}

// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn beacon(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beacon"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_perfect_run(dir: &Path) {
    std::fs::write(
        dir.join("truth.csv"),
        "frame_id,object_id,kind,dist_m,angle_deg\n0,0,beacon,6.0,1.0\n0,1,person_vest,8.0,-6.0\n1,0,beacon,12.0,-3.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("detections.csv"),
        "frame_id,source,dist_m,angle_deg,conf\n0,fused,6.0,1.0,0.9\n1,camera,12.0,-3.0,0.8\n",
    )
    .unwrap();
}

#[test]
fn evaluate_prints_rates() {
    let dir = tempfile::tempdir().unwrap();
    write_perfect_run(dir.path());
    let o = beacon(
        &["evaluate", "--detections", "detections.csv", "--truth", "truth.csv", "--out-dir", "eval"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("TPR=1.000 FPR=0.000 FNR=0.000"), "{}", stdout(&o));
    assert!(dir.path().join("eval/metrics.json").exists());
}

#[test]
fn single_cell_grid_reports_that_cell() {
    let dir = tempfile::tempdir().unwrap();
    write_perfect_run(dir.path());
    std::fs::write(dir.path().join("lidar_candidates.csv"), "frame_id,dist_m,angle_deg,discriminant\n0,6.0,1.2,-3.0\n").unwrap();
    std::fs::write(
        dir.path().join("camera_detections.csv"),
        "frame_id,source,dist_m,angle_deg,conf\n0,camera,6.1,1.0,0.9\n1,camera,12.0,-3.0,0.95\n",
    )
    .unwrap();
    let o = beacon(
        &["grid-search", "--run-dir", ".", "--truth", "truth.csv", "--alphas", "0.001", "--cs", "0.7", "--json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"], 1);
    assert_eq!(v["best"]["alpha"], 0.001);
    assert_eq!(v["best"]["C"], 0.7);
    let tpr = std::fs::read_to_string(dir.path().join("out/grid_tpr.csv")).unwrap();
    assert_eq!(tpr.lines().count(), 2);
}

#[test]
fn missing_argument_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = beacon(&["train-svm"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage: beacon train-svm"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_fails_with_position() {
    let dir = tempfile::tempdir().unwrap();
    write_perfect_run(dir.path());
    std::fs::write(dir.path().join("cfg.toml"), "seed = 3\nepsilon = 0.4\n").unwrap();
    let o = beacon(
        &["--config", "cfg.toml", "evaluate", "--detections", "detections.csv", "--truth", "truth.csv"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cfg.toml:2:1"), "{}", stderr(&o));
}

#[test]
fn failures_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = beacon(&["evaluate", "--detections", "none.csv", "--truth", "none.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("none.csv"), "{}", stderr(&o));
}

//! Command-line behavior of the `frictional-mpm` binary.

use std::fs;
use std::process::Command;

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frictional-mpm"))
}

fn csv_files(dir: &std::path::Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn missing_scene_fails_without_writing() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = bin().args(["simulate", "no-such-scene.toml", "--frames", "3", "--out"]).arg(&out).status().unwrap();
    assert!(!status.success());
    assert!(!out.exists());
}

#[test]
fn zero_frames_writes_the_initial_state() {
    let tmp = tempdir().unwrap();
    let status = bin().args(["simulate", "cube-drop", "--frames", "0", "--serial", "--out"]).arg(tmp.path()).status().unwrap();
    assert!(status.success());
    assert_eq!(csv_files(tmp.path()), ["frame_0000.csv"]);
}

#[test]
fn frames_produce_snapshots_and_diagnostics() {
    let tmp = tempdir().unwrap();
    let status = bin().args(["simulate", "cube-drop", "--frames", "3", "--serial", "--out"]).arg(tmp.path()).status().unwrap();
    assert!(status.success());
    assert_eq!(csv_files(tmp.path()), ["diagnostics.csv", "frame_0001.csv", "frame_0002.csv", "frame_0003.csv"]);
    let diag = fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = diag.lines().collect();
    assert_eq!(lines[0], "step,time,n_contacts,admm_iters,ncp_residual,max_penetration,kinetic_energy");
    assert_eq!(lines.len(), 4);
    let frame = fs::read_to_string(tmp.path().join("frame_0003.csv")).unwrap();
    assert_eq!(frame.lines().next(), Some("body_id,px,py,pz,vx,vy,vz,detF"));
    assert_eq!(frame.lines().count(), 1 + 45 + 500);
}

#[test]
fn exported_scene_runs_from_file() {
    let tmp = tempdir().unwrap();
    let scene_dir = tmp.path().join("scene");
    assert!(bin().args(["presets", "export", "cube-drop"]).arg(&scene_dir).status().unwrap().success());
    let out = tmp.path().join("out");
    let status = bin().arg("simulate").arg(scene_dir.join("scene.toml")).args(["--frames", "1", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    assert!(out.join("frame_0001.csv").exists());
}

#[test]
fn presets_are_listed() {
    let out = bin().args(["presets", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["cube-drop", "block-stack", "incline", "plastic-walls", "fluid-intrusion"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn sweep_writes_one_row_per_mu() {
    let tmp = tempdir().unwrap();
    let file = tmp.path().join("sweep.csv");
    let status = bin().args(["sweep-mu", "incline", "--mu", "0,0.8", "--steps", "20", "--serial", "--out"]).arg(&file).status().unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(&file).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "mu,mean_speed");
    assert_eq!(rows.len(), 3);
}

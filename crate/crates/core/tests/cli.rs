//! Subcommand-level tests against the built binary: golden outputs for the
//! inspection tools plus an end-to-end simulate/evaluate/plot pipeline.

mod common;

use std::path::Path;
use std::process::Command;

use navstack::bev::{class, ground_plane_depth, CameraIntrinsics, SegMap};

fn navstack() -> Command {
    Command::new(env!("CARGO_BIN_EXE_navstack"))
}

#[test]
fn help_works_for_every_subcommand() {
    for sub in [
        "simulate",
        "evaluate",
        "geodesy",
        "bev",
        "policy-trace",
        "plot",
    ] {
        let out = navstack().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
        assert!(!out.stdout.is_empty());
    }
    let out = navstack().arg("--help").output().unwrap();
    assert!(out.status.success());
}

#[test]
fn invalid_flags_exit_nonzero() {
    let out = navstack()
        .args(["geodesy", "--no-such-flag"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));

    let out = navstack().args(["frobnicate"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn geodesy_subcommand_golden_values() {
    // One degree of longitude on the equator, vehicle facing east: the
    // target sits dead ahead at the equatorial-arc distance.
    let out = navstack()
        .args(["geodesy", "0,0", "0,1", "--bearing", "90"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let local: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = local["x_m"].as_f64().unwrap();
    let y = local["y_m"].as_f64().unwrap();
    assert!(x.abs() < 1e-6, "x = {x}");
    assert!((y - 40_075_000.0 / 360.0).abs() < 1e-6, "y = {y}");

    // Same point, facing north: target due right.
    let out = navstack().args(["geodesy", "0,0", "0,1"]).output().unwrap();
    let local: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((local["x_m"].as_f64().unwrap() - 40_075_000.0 / 360.0).abs() < 1e-6);

    // Polar origins are rejected with the config exit code.
    let out = navstack()
        .args(["geodesy", "89.5,0", "89.5,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bev_subcommand_builds_the_expected_grid() {
    let dir = tempfile::tempdir().unwrap();
    let intr = CameraIntrinsics {
        width: 64,
        height: 32,
        fx: 32.0,
        fy: 32.0,
        cx: 32.0,
        cy: 16.0,
        cam_height_m: 0.9,
        cam_pitch_deg: 5.0,
    };
    let depth = ground_plane_depth(&intr);
    let seg = SegMap::filled(32, 64, class::ROAD).unwrap();
    let depth_path = dir.path().join("frame.dpf");
    let seg_path = dir.path().join("frame.pgm");
    let intr_path = dir.path().join("intr.json");
    let out_path = dir.path().join("grid.pgm");
    depth.write_file(&depth_path).unwrap();
    seg.write_file(&seg_path).unwrap();
    std::fs::write(&intr_path, serde_json::to_string(&intr).unwrap()).unwrap();

    let out = navstack()
        .args([
            "bev",
            depth_path.to_str().unwrap(),
            seg_path.to_str().unwrap(),
            "--intrinsics",
            intr_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Golden grid from the library pipeline on the same inputs.
    let points = navstack::bev::depth_to_points(&depth, &intr).unwrap();
    let expected = navstack::bev::project_to_bev(&points, &seg).unwrap();
    let grid = navstack::bev::BevGrid::read_file(&out_path).unwrap();
    assert_eq!(grid, expected);
    let occupied = grid.data.iter().filter(|&&c| c != class::NONE).count();
    assert!(occupied > 0);
}

#[test]
fn policy_trace_golden_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("agents.csv");
    std::fs::write(
        &csv_path,
        "mlp_steering,mlp_throttle,pid_steering,pid_throttle\n\
         0.5,0.5,0.3,0.05\n\
         0.2,0.05,0.4,0.02\n\
         0.05,0.5,0.4,0.5\n\
         0.3,0.5,0.5,0.5\n",
    )
    .unwrap();
    let out = navstack()
        .args(["policy-trace", csv_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "steering,throttle");
    // Direct-agent takeover, full stop, steering takeover, plain blend.
    assert_eq!(lines[1], "0.500000,0.500000");
    assert_eq!(lines[2], "0.000000,0.000000");
    assert_eq!(lines[3], "0.400000,0.500000");
    assert_eq!(lines[4], "0.400000,0.500000");
}

fn write_mini_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut spec = common::fixtures::straight_world_spec(false);
    spec.route_local = Some(vec![[0.0, 12.0], [0.0, 24.0]]);
    let world_path = dir.join("world.json");
    std::fs::write(&world_path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let config = serde_json::json!({
        "world": "world.json",
        "seed": 7,
        "episode_limit_ticks": 200,
        "out_dir": "episode",
        "controller": {"lateral": {"kp": -0.02, "ki": 0.0, "kd": 0.0}},
    });
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    (config_path, dir.join("episode"))
}

#[test]
fn simulate_evaluate_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (config_path, episode_dir) = write_mini_fixture(dir.path());

    let out = navstack()
        .args(["simulate", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "simulate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("finished: true"), "{stdout}");
    let record = episode_dir.join("record.jsonl");
    assert!(record.exists());
    assert!(episode_dir.join("config.json").exists());

    // Evaluate the record against itself.
    let report_path = dir.path().join("report.json");
    let csv_path = dir.path().join("report.csv");
    let out = navstack()
        .args([
            "evaluate",
            record.to_str().unwrap(),
            "--out",
            report_path.to_str().unwrap(),
            "--csv",
            csv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "evaluate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["mae_st"]["mean"].as_f64().unwrap(), 0.0);
    assert!(report["mae_wp"]["mean"].as_f64().unwrap() >= 0.0);
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv_text.starts_with("run,total_metric,iou_seg"));

    // Plot to SVG + CSV.
    let svg_path = dir.path().join("traj.svg");
    let tick_csv = dir.path().join("traj.csv");
    let out = navstack()
        .args([
            "plot",
            record.to_str().unwrap(),
            "--svg",
            svg_path.to_str().unwrap(),
            "--csv",
            tick_csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<line"));
    let ticks = std::fs::read_to_string(&tick_csv).unwrap();
    assert!(ticks.lines().count() > 10);
    assert!(ticks.starts_with("t,x_east_m,y_north_m"));
}

#[test]
fn simulate_uses_env_var_for_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let (config_path, _) = write_mini_fixture(dir.path());
    let out = navstack()
        .arg("simulate")
        .env("NAVSTACK_CONFIG", config_path.to_str().unwrap())
        .args(["--out", dir.path().join("env-run").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "simulate via env failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("env-run/record.jsonl").exists());
}

#[test]
fn missing_config_is_exit_code_2() {
    let out = navstack()
        .args(["simulate", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Simulate with a config that parses but points at a missing world.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    std::fs::write(&config_path, r#"{"world": "missing.json", "seed": 1}"#).unwrap();
    let out = navstack()
        .args(["simulate", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_with_no_records_fails() {
    let out = navstack().arg("evaluate").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn predictor_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (config_path, _) = write_mini_fixture(dir.path());
    // Switching to playback without a record is a validation error (2).
    let out = navstack()
        .args([
            "simulate",
            config_path.to_str().unwrap(),
            "--predictor",
            "playback",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("playback_record"));

    let out = navstack()
        .args([
            "simulate",
            config_path.to_str().unwrap(),
            "--predictor",
            "not-a-predictor",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

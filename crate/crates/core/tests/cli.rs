//! End-to-end CLI tests: subcommand wiring, exit codes, file outputs,
//! and pipeline integration on a desk-scale config.

mod common;

use std::fs;
use std::path::Path;

use marl_dyn::cli_io::cli_main;

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("marl-dyn").chain(args.iter().copied()))
}

fn write_tiny_config(path: &Path) {
    let config = r#"{
        "game": {"name": "prisoners_dilemma"},
        "agents": [
            {"kind": "tabular_q", "alpha": 0.001, "gamma": 0.9,
             "exploration": {"mode": "boltzmann", "temperature": 0.25}},
            {"kind": "tabular_q", "alpha": 0.001, "gamma": 0.9,
             "exploration": {"mode": "boltzmann", "temperature": 0.25}}
        ],
        "n_steps": 4000,
        "n_burn": 1000,
        "n_runs": 3,
        "seed": 99,
        "record_stride": 4,
        "projection_mode": "action_prob"
    }"#;
    fs::write(path, config).unwrap();
}

#[test]
fn describe_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pd.json");
    write_tiny_config(&config);
    assert_eq!(run(&["describe", "--config", config.to_str().unwrap()]), 0);
}

#[test]
fn missing_config_argument_is_usage_error() {
    assert_eq!(run(&["simulate"]), 1);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run(&["frobnicate"]), 1);
}

#[test]
fn invalid_config_maps_to_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{"game": {"name": "prisoners_dilemma"}, "agents": [], "n_burn": 9, "n_steps": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        1
    );
}

#[test]
fn full_pipeline_simulate_diagnose_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pd.json");
    write_tiny_config(&config);
    let traces = dir.path().join("traces");
    let report = dir.path().join("report.json");

    assert_eq!(
        run(&["simulate", "--config", config.to_str().unwrap(), "--out", traces.to_str().unwrap()]),
        0
    );
    assert!(traces.join("manifest.json").exists());
    assert!(traces.join("trace_run0.csv").exists());
    assert!(traces.join("trace_run2.csv").exists());

    assert_eq!(
        run(&["diagnose", "--traces", traces.to_str().unwrap(), "--out", report.to_str().unwrap()]),
        0
    );
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    // All four scalar diagnostics populated.
    assert!(parsed["frobenius_pooled"].is_number());
    assert!(parsed["lambda_max"]["mean"].is_number());
    assert!(parsed["d2"]["mean"].is_number());
    assert!(parsed["recurrence"]["achieved_rate"].is_number());
    assert!(dir.path().join("density.csv").exists());
    assert!(dir.path().join("recurrence_run0.pgm").exists());

    // Replicator field + phase portrait over the first trace.
    let field = dir.path().join("field.csv");
    assert_eq!(
        run(&[
            "replicator",
            "--game",
            "prisoners_dilemma",
            "--out",
            field.to_str().unwrap(),
            "--resolution",
            "12",
        ]),
        0
    );
    let spec = dir.path().join("plot.json");
    let portrait = dir.path().join("portrait.svg");
    fs::write(
        &spec,
        serde_json::json!({
            "kind": "phase_portrait",
            "field": field,
            "traces": [traces.join("trace_run0.csv")],
            "out": portrait,
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(run(&["plot", "--spec", spec.to_str().unwrap()]), 0);
    let svg = fs::read_to_string(&portrait).unwrap();
    assert!(svg.contains("<polyline"));
    assert!(svg.contains("<polygon")); // end-marker star

    // Recurrence pass-through keeps bytes.
    let rec_spec = dir.path().join("rec_plot.json");
    let rec_out = dir.path().join("recurrence_copy.pgm");
    fs::write(
        &rec_spec,
        serde_json::json!({
            "kind": "recurrence",
            "input": dir.path().join("recurrence_run0.pgm"),
            "out": rec_out,
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(run(&["plot", "--spec", rec_spec.to_str().unwrap()]), 0);
    assert_eq!(
        fs::read(dir.path().join("recurrence_run0.pgm")).unwrap(),
        fs::read(&rec_out).unwrap()
    );
}

#[test]
fn diagnose_refuses_mixed_trace_directories_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pd.json");
    write_tiny_config(&config);
    let traces = dir.path().join("traces");
    assert_eq!(
        run(&["simulate", "--config", config.to_str().unwrap(), "--out", traces.to_str().unwrap()]),
        0
    );
    // A stray trace file not listed in the manifest poisons the directory.
    fs::write(traces.join("trace_run99.csv"), "run_index,h,theta_0,theta_1\n99,1,0,0\n").unwrap();
    let report = dir.path().join("report.json");
    assert_ne!(
        run(&["diagnose", "--traces", traces.to_str().unwrap(), "--out", report.to_str().unwrap()]),
        0
    );
    assert_eq!(
        run(&[
            "diagnose",
            "--traces",
            traces.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
            "--force",
        ]),
        0
    );
}

#[test]
fn fully_diverged_ensemble_exits_2_and_records_the_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("explode.json");
    // An absurd learning rate overflows the divergence guard quickly.
    fs::write(
        &config,
        r#"{
            "game": {"name": "matching_pennies"},
            "agents": [
                {"kind": "idqn", "learning_rate": 1000.0, "gamma": 0.9, "hidden": [8],
                 "buffer_capacity": 64, "batch_size": 8, "target_sync": 10,
                 "exploration": {"mode": "epsilon_greedy", "eps_start": 0.9, "eps_end": 0.1}},
                {"kind": "idqn", "learning_rate": 1000.0, "gamma": 0.9, "hidden": [8],
                 "buffer_capacity": 64, "batch_size": 8, "target_sync": 10,
                 "exploration": {"mode": "epsilon_greedy", "eps_start": 0.9, "eps_end": 0.1}}
            ],
            "n_steps": 3000,
            "n_burn": 100,
            "n_runs": 2,
            "seed": 1,
            "record_stride": 10
        }"#,
    )
    .unwrap();
    let traces = dir.path().join("traces");
    assert_eq!(
        run(&["simulate", "--config", config.to_str().unwrap(), "--out", traces.to_str().unwrap()]),
        2,
        "all-diverged ensemble is a runtime failure"
    );
    // The manifest still records the divergence reports honestly.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(traces.join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r["diverged"].as_bool().unwrap()));
    assert!(runs.iter().all(|r| r["diverged_at"].is_number()));
    // No partial trace files were left behind.
    let csvs = fs::read_dir(&traces)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".csv"))
        .count();
    assert_eq!(csvs, 0);
    // Diagnosing the empty directory is also a runtime failure.
    let report = dir.path().join("report.json");
    assert_eq!(
        run(&["diagnose", "--traces", traces.to_str().unwrap(), "--out", report.to_str().unwrap()]),
        2
    );
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pd.json");
    write_tiny_config(&config);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        assert_eq!(
            run(&[
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ]),
            0
        );
    }
    let read = |d: &Path| fs::read_to_string(d.join("trace_run0.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn sweep_cli_emits_sensitivity_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_config = dir.path().join("sweep.json");
    fs::write(
        &sweep_config,
        r#"{
            "base": {
                "game": {"name": "matching_pennies"},
                "agents": [
                    {"kind": "tabular_q", "alpha": 0.05, "gamma": 0.9,
                     "exploration": {"mode": "boltzmann", "temperature": 1.0}},
                    {"kind": "tabular_q", "alpha": 0.05, "gamma": 0.9,
                     "exploration": {"mode": "boltzmann", "temperature": 1.0}}
                ],
                "n_steps": 3000,
                "n_burn": 600,
                "n_runs": 2,
                "seed": 5,
                "record_stride": 3
            },
            "param_path": "agents.*.alpha",
            "values": [0.02, 0.1]
        }"#,
    )
    .unwrap();
    let out = dir.path().join("sweep_out");
    assert_eq!(
        run(&["sweep", "--config", sweep_config.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let csv = fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header + one row per grid value");
    assert!(lines[0].starts_with("param_value,lambda_mean"));
    assert!(out.join("sweep_report.json").exists());
    assert!(out.join("point_00/manifest.json").exists());
    assert!(out.join("point_01/manifest.json").exists());

    // Sensitivity plot renders from the emitted CSV.
    let spec = dir.path().join("sens_plot.json");
    let svg_out = dir.path().join("sensitivity.svg");
    fs::write(
        &spec,
        serde_json::json!({
            "kind": "sensitivity",
            "input": out.join("sensitivity.csv"),
            "out": svg_out,
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(run(&["plot", "--spec", spec.to_str().unwrap()]), 0);
    assert!(svg_out.exists());
}

#[test]
fn replicator_trajectory_matches_trace_format() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    let traj = dir.path().join("traj.csv");
    assert_eq!(
        run(&[
            "replicator",
            "--game",
            "matching_pennies",
            "--out",
            field.to_str().unwrap(),
            "--traj-out",
            traj.to_str().unwrap(),
            "--x0",
            "0.7",
            "--y0",
            "0.3",
            "--dt",
            "0.01",
            "--steps",
            "500",
        ]),
        0
    );
    let text = fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("run_index,h,theta_0,theta_1\n"));
    assert_eq!(text.lines().count(), 502); // header + initial + 500 steps
}

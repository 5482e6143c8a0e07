//! End-to-end checks of the command-line interface: exit codes, emitted
//! files, determinism across reruns and execution modes, and the printed
//! summaries.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adlab::report::{COMPARISON_HEADER, CURVES_HEADER, METRICS_HEADER};
use adlab::RunManifest;
use tempfile::TempDir;

fn adlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("not signal-terminated")
}

/// A deliberately small campaign so every subcommand finishes in well under a
/// second.
const TINY_CONFIG: &str = r#"
[model]
kind = "gap_acceptance"

[[parameters]]
name = "t_cr"
lo = 4.0
hi = 9.0
count = 6

[[parameters]]
name = "sigma"
lo = 1.0
hi = 3.0
count = 5

[design]
name = "d"
lo = 0.0
hi = 10.0
count = 7

[run]
true_params = [7.0, 2.0]
trials = 6
replications = 3
strategy = "myopic"
seed = 11
"#;

fn write_tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY_CONFIG).expect("config written");
    path.display().to_string()
}

fn lines_of(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .expect("file readable")
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn run_writes_metrics_and_manifest() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("results");

    let output = adlab(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("final info gain"), "stdout: {stdout}");

    let metrics = out.join("gap_acceptance_myopic_metrics.csv");
    let lines = lines_of(&metrics);
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 1 + 6, "one row per trial");
    // Diagnostics were off: the optional columns are present but empty.
    assert!(lines[1].ends_with(",,,,"), "row: {}", lines[1]);

    let manifest_path = out.join("gap_acceptance_myopic_manifest.json");
    let manifest = RunManifest::from_json(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, 11);
    assert!(manifest.engine.starts_with("adlab "));
    assert!(manifest
        .outputs
        .contains(&"gap_acceptance_myopic_metrics.csv".to_string()));
    assert!(manifest
        .outputs
        .contains(&"gap_acceptance_myopic_manifest.json".to_string()));
    assert_eq!(manifest.config.run.trials, 6);
}

#[test]
fn reruns_and_serial_mode_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let outs = ["a", "b", "c"].map(|name| dir.path().join(name));

    for (out, serial) in outs.iter().zip([false, false, true]) {
        let mut args = vec!["run", &config, "--out", out.to_str().unwrap()];
        if serial {
            args.push("--serial");
        }
        let output = adlab(&args);
        assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    }

    let read = |out: &Path| fs::read(out.join("gap_acceptance_myopic_metrics.csv")).unwrap();
    let (first, second, serial) = (read(&outs[0]), read(&outs[1]), read(&outs[2]));
    assert_eq!(first, second, "rerun changed the metrics bytes");
    assert_eq!(first, serial, "serial execution changed the metrics bytes");
}

#[test]
fn overrides_change_the_plan() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("results");

    let output = adlab(&[
        "run",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "4",
        "--replications",
        "2",
        "--seed",
        "99",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));

    let lines = lines_of(&out.join("gap_acceptance_myopic_metrics.csv"));
    assert_eq!(lines.len(), 1 + 4);
    let manifest_path = out.join("gap_acceptance_myopic_manifest.json");
    let manifest = RunManifest::from_json(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, 99);
    assert_eq!(manifest.config.run.replications, 2);
}

#[test]
fn compare_emits_all_three_strategies() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("results");

    let output = adlab(&[
        "compare",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--lookahead",
        "2",
        "--trials",
        "5",
        "--replications",
        "2",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    for slug in ["myopic", "t_step_ahead", "global_t_step"] {
        assert!(stdout.contains(slug), "stdout missing {slug}: {stdout}");
    }

    let lines = lines_of(&out.join("gap_acceptance_comparison_2step.csv"));
    assert_eq!(lines[0], COMPARISON_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 5, "three strategies per trial");
    assert!(lines[1].starts_with("1,myopic,1,"));
    assert!(lines[2].starts_with("1,t_step_ahead,2,"));
    assert!(lines[3].starts_with("1,global_t_step,2,"));
}

#[test]
fn compare_serial_matches_parallel() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let (par, ser) = (dir.path().join("par"), dir.path().join("ser"));

    for (out, serial) in [(&par, false), (&ser, true)] {
        let mut args = vec![
            "compare",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--trials",
            "4",
            "--replications",
            "2",
        ];
        if serial {
            args.push("--serial");
        }
        let output = adlab(&args);
        assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    }

    assert_eq!(
        fs::read(par.join("gap_acceptance_comparison_2step.csv")).unwrap(),
        fs::read(ser.join("gap_acceptance_comparison_2step.csv")).unwrap(),
        "serial comparison differs from parallel"
    );
}

#[test]
fn decompose_emits_series_and_curve_snapshots() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("results");

    let output = adlab(&[
        "decompose",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--at",
        "1,3",
        "--trials",
        "4",
        "--replications",
        "2",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("peak mean utility difference"),
        "stdout: {stdout}"
    );

    let series = lines_of(&out.join("gap_acceptance_myopic_decomposition.csv"));
    assert_eq!(series[0], METRICS_HEADER);
    assert_eq!(series.len(), 1 + 4);
    // Diagnostics were forced on: every optional column is populated.
    assert!(!series[1].ends_with(','), "row: {}", series[1]);
    assert_eq!(series[1].split(',').count(), 8);
    assert!(series[1].split(',').all(|cell| !cell.is_empty()));

    let curves = lines_of(&out.join("gap_acceptance_myopic_curves.csv"));
    assert_eq!(curves[0], CURVES_HEADER);
    assert_eq!(curves.len(), 1 + 2 * 7, "two snapshots x seven designs");
    assert!(curves[1].starts_with("1,"));
    assert!(curves[8].starts_with("3,"));
}

#[test]
fn oracle_reports_worst_deviation() {
    let output = adlab(&[
        "oracle",
        "--instances",
        "10",
        "--max-lookahead",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("max |solver - enumeration| ="),
        "stdout: {stdout}"
    );
    assert!(stdout.contains("10 instances"), "stdout: {stdout}");
}

#[test]
fn oracle_with_impossible_tolerance_is_a_runtime_failure() {
    let output = adlab(&[
        "oracle",
        "--instances",
        "5",
        "--max-lookahead",
        "2",
        "--seed",
        "3",
        "--tolerance",
        "0.0",
    ]);
    assert_eq!(exit_code(&output), 3);
    assert!(
        stderr_of(&output).contains("check failed"),
        "stderr: {}",
        stderr_of(&output)
    );
}

#[test]
fn presets_round_trip_through_run() {
    let dir = TempDir::new().unwrap();
    let presets = dir.path().join("presets");

    let output = adlab(&["presets", "--out", presets.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    for name in [
        "gap_acceptance.toml",
        "visual_psychometric.toml",
        "memory_retention.toml",
    ] {
        assert!(presets.join(name).exists(), "missing preset {name}");
    }

    // Any preset must be directly runnable; shrink it so the test stays fast.
    let out = dir.path().join("results");
    let config = presets.join("memory_retention.toml");
    let output = adlab(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "3",
        "--replications",
        "2",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_of(&output));
    let lines = lines_of(&out.join("memory_retention_myopic_metrics.csv"));
    assert_eq!(lines.len(), 1 + 3);
}

#[test]
fn config_problems_exit_2() {
    let dir = TempDir::new().unwrap();

    // Semantic violation: a one-point axis cannot define a grid.
    let bad_axis = dir.path().join("bad_axis.toml");
    fs::write(&bad_axis, TINY_CONFIG.replace("count = 6", "count = 1")).unwrap();
    let output = adlab(&["run", bad_axis.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2, "stderr: {}", stderr_of(&output));

    // Syntax violation.
    let not_toml = dir.path().join("not_toml.toml");
    fs::write(&not_toml, "this is { not toml").unwrap();
    let output = adlab(&["run", not_toml.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2, "stderr: {}", stderr_of(&output));

    // Missing file.
    let output = adlab(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2, "stderr: {}", stderr_of(&output));
    assert!(
        stderr_of(&output).contains("absent.toml"),
        "stderr should name the file: {}",
        stderr_of(&output)
    );
}

#[test]
fn usage_problems_exit_1_and_help_exits_0() {
    let output = adlab(&["frobnicate"]);
    assert_eq!(exit_code(&output), 1);

    let output = adlab(&["run", "--no-such-flag", "x.toml"]);
    assert_eq!(exit_code(&output), 1);

    let output = adlab(&[]);
    assert_eq!(exit_code(&output), 1);

    let output = adlab(&["--help"]);
    assert_eq!(exit_code(&output), 0);
    assert!(stdout_of(&output).contains("run"));

    let output = adlab(&["--version"]);
    assert_eq!(exit_code(&output), 0);
    assert!(stdout_of(&output).contains("adlab"));
}

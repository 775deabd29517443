//! End-to-end tests against the compiled binary: output files, determinism,
//! and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evoxel_core::morphology::RobotGrid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evoxel"))
}

fn write_ubot(dir: &Path) -> PathBuf {
    let path = dir.join("ubot.json");
    std::fs::write(&path, RobotGrid::ubot().to_json()).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn run_evolve(robot: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args([
            "evolve",
            "--robot",
            robot.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ])
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn evolve_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let out = dir.path().join("out");
    let result = run_evolve(
        &robot,
        &out,
        &["--generations", "5", "--seed", "7", "--steps", "240"],
    );
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );

    let csv = std::fs::read_to_string(out.join("run_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "header plus five generations");
    assert!(csv.starts_with("generation,best_fitness,g0,"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["best"]["fitness"].is_f64());
    assert_eq!(summary["best"]["genome"].as_array().unwrap().len(), 72);
    assert!(out.join("best_genome.csv").exists());

    // The printed config echo pins the effective configuration.
    let stdout = stdout_of(&result);
    assert!(stdout.contains("config: "));
    assert!(stdout.contains("\"seed\":7"));
}

#[test]
fn evolve_thirty_populations_write_thirty_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let out = dir.path().join("out");
    let result = run_evolve(
        &robot,
        &out,
        &[
            "--generations",
            "1",
            "--populations",
            "30",
            "--steps",
            "120",
        ],
    );
    assert!(result.status.success());
    for id in 0..30 {
        assert!(out.join(format!("run_{id}.csv")).exists(), "run_{id}.csv");
    }
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let args = [
        "--generations",
        "4",
        "--seed",
        "31",
        "--steps",
        "480",
        "--populations",
        "2",
    ];
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run_evolve(&robot, &out_a, &args).status.success());
    assert!(run_evolve(&robot, &out_b, &args).status.success());
    for name in ["run_0.csv", "run_1.csv", "best_genome.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn replay_reproduces_recorded_fitness() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let out = dir.path().join("out");
    assert!(
        run_evolve(&robot, &out, &["--generations", "4", "--seed", "222"])
            .status
            .success()
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let recorded = summary["best"]["fitness"].as_f64().unwrap();

    let replay_out = dir.path().join("replay");
    let result = bin()
        .args([
            "replay",
            "--genome",
            out.join("best_genome.csv").to_str().unwrap(),
            "--robot",
            robot.to_str().unwrap(),
            "--output-dir",
            replay_out.to_str().unwrap(),
            "--svg",
        ])
        .output()
        .unwrap();
    assert!(result.status.success());
    let stdout = stdout_of(&result);
    let fitness: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("fitness "))
        .expect("fitness line")
        .parse()
        .unwrap();
    assert!(
        (fitness - recorded).abs() <= 1e-9,
        "replayed {fitness} vs recorded {recorded}"
    );

    let trace = std::fs::read_to_string(replay_out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 83 * 8);
    assert!(trace.starts_with("tick,actuator,action,d_tl,d_br"));
    let svg = std::fs::read_to_string(replay_out.join("actions.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn probe_reports_overridden_actuator() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let genome_path = dir.path().join("zero.csv");
    std::fs::write(&genome_path, vec!["0"; 72].join(",")).unwrap();

    let out = dir.path().join("probe");
    let result = bin()
        .args([
            "probe",
            "--genome",
            genome_path.to_str().unwrap(),
            "--robot",
            robot.to_str().unwrap(),
            "--actuator",
            "6",
            "--steps",
            "240",
            "--output-dir",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(result.status.success());
    let probe = std::fs::read_to_string(out.join("probe.csv")).unwrap();
    assert!(probe.lines().any(|l| l.starts_with("6,true,1")));

    // Out-of-range index is an input error.
    let result = bin()
        .args([
            "probe",
            "--genome",
            genome_path.to_str().unwrap(),
            "--robot",
            robot.to_str().unwrap(),
            "--actuator",
            "12",
        ])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn calibrate_passes_with_defaults_and_fails_with_weak_springs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal");
    let result = bin()
        .args(["calibrate", "--output-dir", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let settle = std::fs::read_to_string(out.join("settle.csv")).unwrap();
    assert!(settle.starts_with("tick,separation"));
    assert!(stdout_of(&result).contains("within target 12 +/- 4"));

    // Springs ten times too weak settle far slower than the target band.
    let weak = dir.path().join("weak.json");
    std::fs::write(&weak, r#"{"stiffness_actuator": 60.0}"#).unwrap();
    let result = bin()
        .args([
            "calibrate",
            "--physics",
            weak.to_str().unwrap(),
            "--output-dir",
            dir.path().join("weak_out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn plot_renders_polylines_and_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let out = dir.path().join("out");
    assert!(run_evolve(
        &robot,
        &out,
        &["--generations", "3", "--populations", "2", "--steps", "120"]
    )
    .status
    .success());

    let plot_out = dir.path().join("plot");
    let result = bin()
        .args([
            "plot",
            out.join("run_0.csv").to_str().unwrap(),
            out.join("run_1.csv").to_str().unwrap(),
            "--output-dir",
            plot_out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(result.status.success());
    let svg = std::fs::read_to_string(plot_out.join("fitness.svg")).unwrap();
    assert_eq!(
        svg.matches("<polyline").count(),
        3,
        "two runs plus envelope"
    );

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let result = bin()
        .args(["plot", empty.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn exit_codes_for_usage_and_input_errors() {
    // Unknown flag: usage error.
    let result = bin().args(["evolve", "--no-such-flag"]).output().unwrap();
    assert_eq!(result.status.code(), Some(1));

    // Missing robot file: input error.
    let result = bin()
        .args(["evolve", "--robot", "/nonexistent/robot.json"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));

    // Malformed robot grid: input error.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"grid":[[7]]}"#).unwrap();
    let result = bin()
        .args(["evolve", "--robot", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));

    // Help exits zero.
    let result = bin().arg("--help").output().unwrap();
    assert_eq!(result.status.code(), Some(0));
}

#[test]
fn thread_cap_env_var_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let robot = write_ubot(dir.path());
    let out = dir.path().join("out");
    let result = bin()
        .env("EVOXEL_THREADS", "1")
        .args([
            "evolve",
            "--robot",
            robot.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--generations",
            "2",
            "--steps",
            "120",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(result.status.success());

    // Single-threaded output matches the default-parallel output bit for bit.
    let out_par = dir.path().join("par");
    let result_par = run_evolve(
        &robot,
        &out_par,
        &["--generations", "2", "--steps", "120", "--seed", "3"],
    );
    assert!(result_par.status.success());
    assert_eq!(
        std::fs::read(out.join("run_0.csv")).unwrap(),
        std::fs::read(out_par.join("run_0.csv")).unwrap()
    );
}

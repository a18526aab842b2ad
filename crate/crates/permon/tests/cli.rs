//! End-to-end tests of the `permon` binary: artifact layout, exit codes,
//! and byte-level determinism.

use std::path::Path;
use std::process::Command;

fn permon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_permon"))
}

fn write_reference_ellipse(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("ellipse.json");
    std::fs::write(
        &path,
        r#"{"family":"ellipse","agents":[{"X":3.8791,"Y":2.4675,"a":3.8994,"b":1.8926,"phi":0.0}]}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_artifact_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let params = write_reference_ellipse(tmp.path());
    let out = tmp.path().join("run1");
    let status = permon()
        .args(["simulate", "--scenario", "case-a", "--params"])
        .arg(&params)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for file in ["trace.csv", "events.jsonl", "summary.json", "manifest.json"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let j = summary["J"].as_f64().unwrap();
    assert!((640.0..690.0).contains(&j), "J = {j}");
    // The summary must recompose exactly.
    let recomposed = summary["J1"].as_f64().unwrap()
        + -30000.0 * summary["J2"].as_f64().unwrap()
        + -30000.0 * summary["J3"].as_f64().unwrap();
    assert!((j - recomposed).abs() <= 1e-9 * j.abs());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["exit_status"], 0);
    assert_eq!(manifest["scenario"], "case-a");

    // Event log sorted by time.
    let events = std::fs::read_to_string(out.join("events.jsonl")).unwrap();
    let times: Vec<f64> = events
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["time"].as_f64().unwrap())
        .collect();
    assert!(!times.is_empty());
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn missing_params_file_exits_2_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let status = permon()
        .args(["simulate", "--scenario", "case-a", "--params", "does-not-exist.json"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_status"], 2);
}

#[test]
fn invalid_scenario_document_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let params = write_reference_ellipse(tmp.path());
    let scenario = tmp.path().join("bad.json");
    // beta below v_max violates the sensing threshold requirement.
    std::fs::write(
        &scenario,
        r#"{
            "space": {"L1": 10.0, "L2": 5.0},
            "targets": [{"x": 5.0, "y": 2.5, "sigma": 1.0, "A": 1.0, "R0": 0.0}],
            "agents": [{"u_max": 1.0, "v_max": 1.5, "r_sense": 2.0, "beta": 1.0, "rho": 0.2}],
            "penalties": {"M2": -30000.0, "M3": -30000.0, "margin": 0.02},
            "horizon": {"T": 40.0, "dt": 0.01},
            "B": 15.0
        }"#,
    )
    .unwrap();
    let out = tmp.path().join("run");
    let output = permon()
        .args(["simulate", "--scenario"])
        .arg(&scenario)
        .arg("--params")
        .arg(&params)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("beta must exceed v_max"), "stderr: {stderr}");
}

#[test]
fn grad_check_passes_and_impossible_tolerance_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("small.json");
    std::fs::write(
        &scenario,
        r#"{
            "space": {"L1": 10.0, "L2": 5.0},
            "targets": [
                {"x": 4.0, "y": 2.0, "sigma": 1.0, "A": 1.0, "R0": 5.0},
                {"x": 6.0, "y": 3.0, "sigma": 2.0, "A": 1.0, "R0": 5.0}
            ],
            "agents": [{"u_max": 1.0, "v_max": 1.5, "r_sense": 2.0, "beta": 5.0, "rho": 0.2}],
            "penalties": {"M2": -30000.0, "M3": -30000.0, "margin": 0.02},
            "horizon": {"T": 5.0, "dt": 0.01},
            "B": 15.0
        }"#,
    )
    .unwrap();
    let params = tmp.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"family":"ellipse","agents":[{"X":5.0,"Y":2.5,"a":2.0,"b":1.2,"phi":0.4}]}"#,
    )
    .unwrap();

    let out = tmp.path().join("check");
    let status = permon()
        .args(["grad-check", "--scenario"])
        .arg(&scenario)
        .args(["--params".as_ref() as &std::ffi::OsStr, params.as_os_str()])
        .args(["--mode", "paper", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    // Every component listed by name.
    let comps = report["components"].as_array().unwrap();
    assert_eq!(comps.len(), 5);
    for (comp, name) in comps.iter().zip(["X", "Y", "a", "b", "phi"]) {
        assert_eq!(comp["name"], format!("agent0.{name}"));
    }

    // Zero tolerance cannot pass against finite-difference noise.
    let out2 = tmp.path().join("check0");
    let status = permon()
        .args(["grad-check", "--scenario"])
        .arg(&scenario)
        .args(["--params".as_ref() as &std::ffi::OsStr, params.as_os_str()])
        .args(["--mode", "paper", "--tolerance", "0", "--out"])
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(5));
}

#[test]
fn optimize_and_sweep_are_deterministic() {
    // A deliberately small scenario so two optimize runs and a sweep stay
    // cheap: horizon 2s, two targets, one obstacle.
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("tiny.json");
    std::fs::write(
        &scenario,
        r#"{
            "space": {"L1": 10.0, "L2": 5.0},
            "targets": [
                {"x": 4.0, "y": 2.0, "sigma": 1.0, "A": 1.0, "R0": 0.0},
                {"x": 6.0, "y": 3.0, "sigma": 2.0, "A": 1.0, "R0": 0.0}
            ],
            "obstacles": [{"x": 8.0, "y": 1.0, "r": 0.5}],
            "agents": [{"u_max": 1.0, "v_max": 1.5, "r_sense": 2.0, "beta": 5.0, "rho": 0.2}],
            "penalties": {"M2": -30000.0, "M3": -30000.0, "margin": 0.02},
            "horizon": {"T": 2.0, "dt": 0.01},
            "B": 15.0
        }"#,
    )
    .unwrap();

    let run = |out: &Path| {
        let status = permon()
            .args(["optimize", "--scenario"])
            .arg(&scenario)
            .args(["--family", "ellipse", "--starts", "3", "--seed", "9", "--max-iters", "30", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run(&out_a);
    run(&out_b);
    for file in ["convergence.csv", "best_params.json", "trace.csv", "events.jsonl", "summary.json", "manifest.json"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // convergence.csv schema.
    let conv = std::fs::read_to_string(out_a.join("convergence.csv")).unwrap();
    assert!(conv.starts_with("start,h,J,J1,J2,J3,alpha,grad_norm\n"));

    // best_params.json round-trips through simulate.
    let sim_out = tmp.path().join("resim");
    let status = permon()
        .args(["simulate", "--scenario"])
        .arg(&scenario)
        .arg("--params")
        .arg(out_a.join("best_params.json"))
        .arg("--out")
        .arg(&sim_out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Sweep over the two sensing models: comparison table with two rows.
    let sweep_out = tmp.path().join("sweep");
    let status = permon()
        .args(["sweep", "--scenario"])
        .arg(&scenario)
        .args([
            "--family",
            "ellipse",
            "--sensing",
            "velocity,distance-only",
            "--starts",
            "2",
            "--seed",
            "9",
            "--max-iters",
            "20",
            "--out",
        ])
        .arg(&sweep_out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(sweep_out.join("comparison.csv")).unwrap();
    assert!(table.starts_with("configuration,J,J2,J3\n"));
    assert_eq!(table.lines().count(), 3, "two configuration rows:\n{table}");
    assert!(table.contains("ellipse_velocity,"));
    assert!(table.contains("ellipse_distance-only,"));
    for sub in ["ellipse_velocity", "ellipse_distance-only"] {
        assert!(sweep_out.join(sub).join("best_params.json").is_file());
    }
}

#[test]
fn unknown_subcommand_and_bad_flag_exit_2() {
    let status = permon().arg("frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = permon()
        .args(["sweep", "--scenario", "case-a", "--sensing", "nonsense"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

use std::path::{Path, PathBuf};
use std::process::Command;

use berger_lab::cli::{RunManifest, RunStatus, Snapshot};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_berger-lab"));
    cmd.env_remove("BERGER_LAB_THREADS");
    cmd
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn invoke(command: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let output = bin()
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn manifest(out: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = csv(path);
    let k = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[k].clone()).collect()
}

#[test]
fn simulate_zero_data_writes_zero_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]}, "horizon": 0.05, "stepper": {"dt": 0.01}}"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = invoke("simulate", &cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let m = manifest(&out);
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.command, "simulate");
    assert!(m.verify(&out).unwrap().is_empty());
    let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for expected in [
        "config.json",
        "energies.csv",
        "summary.json",
        "snapshots/snap_000000.bplt",
    ] {
        assert!(paths.contains(&expected), "{paths:?}");
    }
    let (header, rows) = csv(&out.join("energies.csv"));
    assert_eq!(header.last().unwrap(), "picard_iterations");
    assert_eq!(rows.len(), 6);
    for row in rows {
        for value in &row[1..row.len() - 1] {
            assert_eq!(value.parse::<f64>().unwrap(), 0.0);
        }
    }
    let last = std::fs::read(out.join("snapshots/snap_000005.bplt")).unwrap();
    let snap = Snapshot::from_bytes(&last).unwrap();
    assert_eq!((snap.nx, snap.ny), (9, 9));
    assert!((snap.time - 0.05).abs() < 1e-12);
    assert!(snap.u.iter().chain(&snap.v).all(|&x| x == 0.0));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]},
            "physics": {"gamma": 1, "load": {"profile": "random", "amplitude": 5}},
            "initial": {"displacement": {"profile": "random", "amplitude": 0.3}},
            "horizon": 0.05,
            "snapshot_every": 2
        }"#,
    );
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    for dir in [&a, &b] {
        assert_eq!(invoke("simulate", &cfg, dir, &["--seed", "7"]).0, 0);
    }
    assert_eq!(invoke("simulate", &cfg, &c, &["--seed", "8"]).0, 0);
    let (ma, mb, mc) = (manifest(&a), manifest(&b), manifest(&c));
    let strip = |m: &RunManifest| -> Vec<(String, String)> {
        m.files
            .iter()
            .filter(|f| f.path != "config.json")
            .map(|f| (f.path.clone(), f.sha256.clone()))
            .collect()
    };
    assert_eq!(strip(&ma), strip(&mb));
    assert_ne!(strip(&ma), strip(&mc));
    assert_eq!(ma.config.seed, 7);
    assert!(
        ma.files
            .iter()
            .filter(|f| f.path.ends_with(".bplt"))
            .count()
            >= 3
    );
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        r#"{"configuration": "FCD1D", "domain": {"kind": "rectangle", "extents": [1, 1]}, "horizon": 1}"#,
    );
    let (code, err) = invoke("simulate", &cfg, &out, &[]);
    assert_eq!(code, 1);
    assert!(err.contains("configuration/domain mismatch"), "{err}");
    let cfg = write_config(
        tmp.path(),
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "extra": 1}"#,
    );
    assert_eq!(invoke("simulate", &cfg, &out, &[]).0, 1);
    let cfg = write_config(
        tmp.path(),
        r#"{"configuration": "FCD1D", "domain": {"kind": "interval", "extents": [1], "resolution": [9]}, "horizon": 0.1}"#,
    );
    let (code, err) = invoke("absorb", &cfg, &out, &[]);
    assert_eq!(code, 1, "{err}");
    let output = bin().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("--config <path>"));
}

#[test]
fn numerical_failure_exits_with_two_and_flags_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "interval", "extents": [1], "resolution": [33]},
            "damping": {"name": "saturating"},
            "stepper": {"dt": 0.05, "picard_iterations": 2, "picard_tolerance": 1e-14},
            "initial": {"displacement": {"profile": "mode", "amplitude": 5}, "velocity": {"profile": "bump", "amplitude": 50}},
            "horizon": 0.5
        }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = invoke("simulate", &cfg, &out, &[]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("Picard"), "{err}");
    let m = manifest(&out);
    assert_eq!(m.status, RunStatus::Partial);
    assert!(!m.failures.is_empty());
    assert!(m.verify(&out).unwrap().is_empty());
}

#[test]
fn converge_on_linear_eigenmode_reports_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]},
            "damping": {"name": "zero"},
            "stepper": {"dt": 0.004, "linearized": true},
            "initial": {"displacement": {"profile": "mode", "amplitude": 1}},
            "horizon": 0.2,
            "record_stride": 1000
        }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = invoke("converge", &cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let orders: Vec<f64> = column(&out.join("converge.csv"), "observed_order")
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|p| (1.8..=2.2).contains(p)), "{orders:?}");
}

#[test]
fn absorb_reports_three_entries_and_one_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]},
            "physics": {"load": {"profile": "ramp", "amplitude": 10}},
            "initial": {"displacement": {"profile": "mode", "amplitude": 1}, "velocity": {"profile": "bump", "amplitude": 1}},
            "stepper": {"dt": 0.004},
            "horizon": 3,
            "experiment": {"absorb": {"window": 0.4}}
        }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = invoke("absorb", &cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("absorb.json")).unwrap()).unwrap();
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r["entry_time"].is_f64()));
    assert!(report["ball_radius"].is_f64());
    let initial: Vec<f64> = runs
        .iter()
        .map(|r| r["initial_hat_e"].as_f64().unwrap())
        .collect();
    for (e, target) in initial.iter().zip([1.0, 10.0, 100.0]) {
        assert!((e - target).abs() < 1e-6 * target);
    }
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]},
            "initial": {"displacement": {"profile": "mode", "amplitude": 1}},
            "stepper": {"dt": 0.01},
            "horizon": 0.3,
            "experiment": {"absorb": {"window": 0.1, "energies": [1, 2]}}
        }"#,
    );
    let out = tmp.path().join("out");
    for (value, expected) in [("zero", 1), ("0", 1), ("1", 0)] {
        let output = bin()
            .env("BERGER_LAB_THREADS", value)
            .args(["absorb", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(expected), "{value}");
    }
}

#[test]
fn audit_and_diff_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "domain": {"kind": "rectangle", "extents": [1, 1], "resolution": [9, 9]},
            "physics": {"gamma": 2, "load": {"profile": "ramp", "amplitude": 1}},
            "initial": {"displacement": {"profile": "mode", "amplitude": 0.4}},
            "stepper": {"dt": 0.004},
            "horizon": 0.2,
            "experiment": {"audit": {"windows": 2}}
        }"#,
    );
    let out = tmp.path().join("audit");
    let (code, err) = invoke("audit", &cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(report["multiplier"].as_array().unwrap().len(), 4);
    assert!(report["equivalence_holds"].as_bool().unwrap());
    assert!(report["decomposition"]["residual"].as_f64().unwrap() < 1e-2);
    assert_eq!(column(&out.join("multiplier.csv"), "identity").len(), 4);

    let out = tmp.path().join("diff");
    let (code, err) = invoke("diff", &cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("diff.json")).unwrap()).unwrap();
    assert!(report["decay_ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(column(&out.join("diff_energy.csv"), "energy_z").len(), 51);

    let beam = write_config(
        tmp.path(),
        r#"{
            "configuration": "FCD1D",
            "domain": {"kind": "interval", "extents": [1], "resolution": [17]},
            "damping": {"name": "zero"},
            "initial": {"displacement": {"profile": "tip", "amplitude": 0.1}},
            "experiment": {"diff": {"perturbation": {"displacement": {"profile": "tip", "amplitude": 0.01}}}},
            "stepper": {"dt": 0.004},
            "horizon": 0.1
        }"#,
    );
    for command in ["audit", "diff", "simulate"] {
        let out = tmp.path().join(format!("beam-{command}"));
        let (code, err) = invoke(command, &beam, &out, &[]);
        assert_eq!(code, 0, "{command}: {err}");
        assert!(manifest(&out).verify(&out).unwrap().is_empty());
    }
}

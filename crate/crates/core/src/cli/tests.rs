use super::config::*;
use super::*;
use crate::damping::LawSpec;
use crate::geometry::{Configuration, DomainKind};

const MINIMAL: &str = r#"{"domain": {"kind": "rectangle", "extents": [1, 1]}, "horizon": 0.5}"#;

#[test]
fn minimal_document_gets_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.configuration, Some(Configuration::Hd2d));
    assert_eq!(cfg.physics.mu, 1.0);
    assert_eq!(cfg.physics.gamma, 0.0);
    assert_eq!(cfg.damping, LawSpec::Linear { k: 1.0 });
    assert_eq!(cfg.domain.resolution, Some(vec![DEFAULT_RESOLUTION; 2]));
    // Lowest period 1/π, divided by 200 and rounded down to 1-2-5.
    assert_eq!(cfg.stepper.dt, Some(1e-3));
    assert_eq!(cfg.record_stride, 1);
    assert_eq!(cfg.experiment.absorb.energies, vec![1.0, 10.0, 100.0]);
}

#[test]
fn beam_on_rectangle_is_rejected() {
    let text = r#"{"configuration": "FCD1D", "domain": {"kind": "rectangle", "extents": [1, 1]}, "horizon": 1}"#;
    let err = parse_config(text).unwrap_err();
    assert!(
        err.to_string().contains("configuration/domain mismatch"),
        "{err}"
    );
    assert_eq!(exit_code(&err), EXIT_CONFIG);
}

#[test]
fn round_trip_is_identical() {
    let text = r#"{
        "configuration": "FCD1D",
        "domain": {"kind": "interval", "extents": [2.0], "resolution": [17]},
        "physics": {"gamma": 1.5, "mu": 0.5, "mu1": 0.2, "load": {"profile": "ramp", "amplitude": 2}},
        "damping": {"name": "zero"},
        "horizon": 0.25,
        "initial": {"displacement": {"profile": "tip", "amplitude": 0.1}},
        "seed": 9
    }"#;
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, again);
    let minimal = parse_config(MINIMAL).unwrap();
    assert_eq!(
        parse_config(&serde_json::to_string_pretty(&minimal).unwrap()).unwrap(),
        minimal
    );
}

#[test]
fn unknown_keys_report_their_path() {
    let text = r#"{"domain": {"kind": "rectangle", "extents": [1, 1], "colour": 3}, "horizon": 1}"#;
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("domain") && err.contains("colour"), "{err}");
    let text = r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "damping": {"name": "quintic"}}"#;
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("damping") && err.contains("quintic"), "{err}");
    let err = parse_config("{\n  \"horizon\": 1,\n  oops\n}")
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invariants_are_checked() {
    let bad = [
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 0}"#,
        r#"{"domain": {"kind": "interval", "extents": [-1]}, "horizon": 1}"#,
        r#"{"domain": {"kind": "interval", "extents": [1], "resolution": [3]}, "horizon": 1}"#,
        r#"{"domain": {"kind": "interval", "extents": [1], "resolution": [9, 9]}, "horizon": 1}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "physics": {"mu": 0.3}}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "physics": {"gamma": -1}}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "stepper": {"dt": 0}}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "record_stride": 0}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "experiment": {"converge": {"levels": 1}}}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "experiment": {"absorb": {"energies": []}}}"#,
        r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1, "initial": {"displacement": {"profile": "mode", "amplitude": 1, "kx": 0}}}"#,
    ];
    for text in bad {
        let err = parse_config(text).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG, "{text}: {err}");
    }
}

#[test]
fn interval_defaults_to_hinged() {
    let cfg =
        parse_config(r#"{"domain": {"kind": "interval", "extents": [1]}, "horizon": 1}"#).unwrap();
    assert_eq!(cfg.configuration(), Configuration::Hd1d);
    assert_eq!(cfg.domain.kind, DomainKind::Interval);
    // Lowest period 2/π, so 2/(200π) ≈ 3.2e-3 rounds to 2e-3.
    assert_eq!(cfg.dt(), 2e-3);
}

#[test]
fn random_profile_follows_the_seed() {
    let p = Profile::Random {
        amplitude: 1.0,
        modes: 3,
    };
    let a = p.evaluator([1.0, 1.0], Configuration::Hd2d, 1);
    let b = p.evaluator([1.0, 1.0], Configuration::Hd2d, 1);
    let c = p.evaluator([1.0, 1.0], Configuration::Hd2d, 2);
    let x = [0.3, 0.7];
    assert_eq!(a(x), b(x));
    assert_ne!(a(x), c(x));
    assert_eq!(a([0.0, 0.4]), 0.0);
    let beam = p.evaluator([1.0, 1.0], Configuration::Fcd1d, 1);
    assert_eq!(beam([0.0, 0.0]), 0.0);
}

#[test]
fn snapshot_round_trip() {
    let s = Snapshot {
        nx: 3,
        ny: 2,
        time: 0.25,
        u: (0..6).map(|k| k as f64).collect(),
        v: (0..6).map(|k| -(k as f64)).collect(),
    };
    let bytes = s.to_bytes();
    assert_eq!(&bytes[..4], b"BPLT");
    assert_eq!(
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        FORMAT_VERSION
    );
    assert_eq!(bytes.len(), 24 + 16 * 6);
    assert_eq!(Snapshot::from_bytes(&bytes).unwrap(), s);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Snapshot::from_bytes(&bad).is_err());
    assert!(Snapshot::from_bytes(&bytes[..30]).is_err());
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::NonFinite { time: 1.0 }), EXIT_NUMERICAL);
    assert_eq!(
        exit_code(&Error::PicardNonConvergence {
            time: 1.0,
            iterations: 2,
            residual: 1.0
        }),
        EXIT_NUMERICAL
    );
    assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    assert_eq!(
        main_with(["berger-lab", "fly", "--config", "x.json"]),
        EXIT_CONFIG
    );
    assert_eq!(main_with(["berger-lab", "simulate"]), EXIT_CONFIG);
    assert_eq!(
        main_with([
            "berger-lab",
            "simulate",
            "--config",
            "/nonexistent/berger.json"
        ]),
        EXIT_CONFIG
    );
}

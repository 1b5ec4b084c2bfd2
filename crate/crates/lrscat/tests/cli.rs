use std::fs;
use std::path::Path;
use std::process::Command;

use lrscat::config::{parse_config, parse_config_str, ConfigError, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrscat"))
}

fn pointer_of(text: &str) -> (String, String) {
    match parse_config_str(text) {
        Err(ConfigError::Schema { pointer, message }) => (pointer, message),
        other => panic!("expected schema error, got {other:?}"),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> (i32, String) {
    let o = bin().args(args).arg("--config").arg(cfg).arg("--out").arg(out).arg("--jobs").arg("1").output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

const SMALL: &str = r#"{"smatrix": {"n": 16, "y_max": 10, "ny": 64}, "verify": {"checks": ["elementary_bound", "surface_measure"]}}"#;

#[test]
fn empty_config_gets_reference_defaults() {
    let cfg = parse_config_str("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    let m = cfg.build_model().unwrap();
    assert_eq!(m, lrscat::model::HamiltonianModel::reference());
    assert_eq!(cfg.verify.seed, 42);
    assert_eq!((cfg.smatrix.lambda, cfg.smatrix.n, cfg.smatrix.y_max, cfg.smatrix.ny), (0.5, 128, 60.0, 1024));
}

#[test]
fn mu_outside_unit_interval_is_a_schema_error() {
    let (p, m) = pointer_of(r#"{"model": {"mu": 1.2}}"#);
    assert_eq!(p, "/model/mu");
    assert_eq!(m, "must be in (0,1)");
    assert_eq!(pointer_of(r#"{"model": {"mu": 0.0}}"#).0, "/model/mu");
}

#[test]
fn unknown_family_is_a_schema_error() {
    let (p, m) = pointer_of(r#"{"model": {"p0_family": "quartic"}}"#);
    assert_eq!(p, "/model/p0_family");
    assert!(m.contains("quartic"), "{m}");
    assert_eq!(pointer_of(r#"{"model": {"potential_family": "coulomb"}}"#).0, "/model/potential_family");
}

#[test]
fn schema_errors_locate_the_offending_key() {
    assert_eq!(pointer_of(r#"{"model": {"cutoff_radius": -1}}"#).0, "/model/cutoff_radius");
    assert_eq!(pointer_of(r#"{"model": {"energy_interval": [0.6, 0.4]}}"#).0, "/model/energy_interval");
    assert_eq!(pointer_of(r#"{"flow": {"data": [{"x": [1, 2], "xi": [1, 0]}, {"x": [1], "xi": [1, 0]}]}}"#).0, "/flow/data/1/x");
    assert_eq!(pointer_of(r#"{"smatrix": {"n": 2}}"#).0, "/smatrix/n");
    assert_eq!(pointer_of(r#"{"verify": {"checks": ["convexity", "nope"]}}"#).0, "/verify/checks/1");
    assert_eq!(pointer_of(r#"{"wavemap": {"sign": "plus"}}"#).0, "/wavemap/sign");
    assert_eq!(pointer_of(r#"{"model": {"mu": "half"}}"#).0, "/model/mu");
    assert_eq!(pointer_of(r#"{"modle": {}}"#).0, "/modle");
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(parse_config(Path::new("/nonexistent/config.json")), Err(ConfigError::Io { .. })));
}

#[test]
fn hash_tracks_content_not_formatting() {
    let a = parse_config_str(r#"{"model": {"mu": 0.5}}"#).unwrap();
    let b = parse_config_str("{}").unwrap();
    let c = parse_config_str(r#"{"model": {"mu": 0.4}}"#).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn bad_config_exits_two_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"model": {"mu": 1.2}}"#);
    let (code, err) = run(&["flow"], &cfg, &dir.path().join("out"));
    assert_eq!(code, 2);
    assert!(err.contains("/model/mu") && err.contains("must be in (0,1)"), "{err}");
}

#[test]
fn missing_config_flag_exits_two() {
    let o = bin().arg("flow").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn smatrix_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.json", SMALL);
    let out = dir.path().join("out");
    let (code, err) = run(&["smatrix"], &cfg, &out);
    assert_eq!(code, 0, "{err}");
    let hash = parse_config(&cfg).unwrap().hash();
    let csv = fs::read_to_string(out.join("smatrix.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], format!("# config_sha256={hash}"));
    assert_eq!(lines[1], "j,k,re,im");
    assert_eq!(lines.len(), 2 + 16 * 16);
    let re: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(format!("{re:.16e}"), lines[2].split(',').nth(2).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("smatrix.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], hash.as_str());
    assert_eq!(meta["N"], 16);
    assert!(meta["unitarity_defect"].as_f64().unwrap() < 0.1);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for sub in ["flow", "hj", "wavemap", "scatmap", "smatrix", "verify"] {
        assert_eq!(run(&[sub], &cfg, &a).0, 0, "{sub}");
        assert_eq!(run(&[sub], &cfg, &b).0, 0, "{sub}");
    }
    let mut n = 0;
    for entry in walk(&a) {
        let rel = entry.strip_prefix(&a).unwrap();
        assert_eq!(fs::read(&entry).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel:?}");
        n += 1;
    }
    assert!(n >= 9, "{n} files");
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn every_output_embeds_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.json", SMALL);
    let out = dir.path().join("out");
    for sub in ["flow", "hj", "wavemap", "scatmap", "verify"] {
        assert_eq!(run(&[sub], &cfg, &out).0, 0, "{sub}");
    }
    let hash = parse_config(&cfg).unwrap().hash();
    for f in walk(&out) {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.contains(&hash), "{f:?}");
    }
    let flow = fs::read_to_string(out.join("flow_0.csv")).unwrap();
    assert_eq!(flow.lines().nth(1), Some("t,x_1,x_2,xi_1,xi_2,energy_drift"));
}

#[test]
fn verify_exit_code_reflects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", SMALL);
    let (code, err) = run(&["verify"], &good, &dir.path().join("g"));
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g/report.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);

    let bad = write(
        dir.path(),
        "mis.json",
        r#"{"model": {"mu": 0.99, "coupling": 10}, "verify": {"checks": ["jacobian_det", "momentum_drift"], "samples": 3, "calibration_samples": 50}}"#,
    );
    let (code, err) = run(&["verify"], &bad, &dir.path().join("m"));
    assert_eq!(code, 1, "{err}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m/report.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().any(|r| r["pass"] == false));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn config_round_trips_with_stable_hash(mu in 0.01f64..0.99, c in -1.0f64..1.0, n in 4usize..512, seed in any::<u64>()) {
            let mut cfg = RunConfig::default();
            cfg.model.mu = mu;
            cfg.model.coupling = c;
            cfg.smatrix.n = n;
            cfg.verify.seed = seed;
            let text = serde_json::to_string(&cfg).unwrap();
            let back = parse_config_str(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.hash(), cfg.hash());
        }

        #[test]
        fn out_of_range_mu_is_rejected(mu in prop_oneof![-5.0f64..=0.0, 1.0f64..5.0]) {
            let (p, m) = pointer_of(&format!(r#"{{"model": {{"mu": {mu}}}}}"#));
            prop_assert_eq!(p, "/model/mu");
            prop_assert_eq!(m, "must be in (0,1)");
        }
    }
}

use lrscat::model::{HamiltonianModel, P0Family, Potential};
use lrscat::verify::*;
use proptest::prelude::*;

// ∫₀^∞ (1+t²)^{-3/4} dt = √π Γ(1/4) / (2 Γ(3/4))
const INTEGRAL_A0_MU_HALF: f64 = 2.622057554292119;
// Γ(1/4)² / (2√π)
const LIMIT_MU_HALF: f64 = 3.708149354602744;

fn power_samples(p: f64, c: f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let s = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            (s, c * s.powf(p))
        })
        .collect()
}

#[test]
fn fit_recovers_exact_square_root() {
    let r = fit_decay("synthetic", &power_samples(0.5, 1.0, 1.0, 1e4, 9), 0.5, 0.1).unwrap();
    assert!((r.observed - 0.5).abs() < 1e-12, "{}", r.observed);
    assert!(r.pass);
    assert_eq!(r.samples.len(), 9);
}

#[test]
fn fit_rejects_short_or_narrow_input() {
    let three = power_samples(0.5, 1.0, 1.0, 1e3, 3);
    assert!(matches!(fit_decay("a", &three, 0.5, 0.1), Err(VerifyError::InsufficientRange(_))));
    let one_decade = power_samples(0.5, 1.0, 1.0, 10.0, 6);
    assert!(matches!(fit_decay("b", &one_decade, 0.5, 0.1), Err(VerifyError::InsufficientRange(_))));
    let mut zero = power_samples(0.5, 1.0, 1.0, 1e3, 6);
    zero[2].1 = 0.0;
    assert!(matches!(fit_decay("c", &zero, 0.5, 0.1), Err(VerifyError::InsufficientRange(_))));
}

#[test]
fn fit_flags_wrong_slope() {
    let r = fit_decay("wrong", &power_samples(-0.3, 2.0, 1.0, 1e3, 6), -0.5, 0.1).unwrap();
    assert!(!r.pass);
    assert_eq!(r.status, CheckStatus::Fail);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fit_is_exact_on_power_laws(p in -2.0f64..2.0, c in 1e-3f64..1e3, lo in 1e-2f64..1e2, decades in 2.0f64..6.0, n in 4usize..20) {
        let r = fit_decay("p", &power_samples(p, c, lo, lo * 10f64.powf(decades), n), p, 1e-9).unwrap();
        prop_assert!((r.observed - p).abs() < 1e-9);
    }

    #[test]
    fn fit_ignores_prefactor(p in -1.0f64..1.0, c in 1e-3f64..1e3) {
        let a = fit_decay("a", &power_samples(p, 1.0, 1.0, 1e3, 7), p, 0.1).unwrap();
        let b = fit_decay("b", &power_samples(p, c, 1.0, 1e3, 7), p, 0.1).unwrap();
        prop_assert!((a.observed - b.observed).abs() < 1e-10);
    }
}

#[test]
fn elementary_integral_closed_forms() {
    let i0 = elementary_integral(0.5, 0.0).unwrap();
    assert!((i0 - INTEGRAL_A0_MU_HALF).abs() < 1e-10, "{i0}");
    let lim = elementary_limit(0.5).unwrap();
    assert!((lim - LIMIT_MU_HALF).abs() < 1e-9, "{lim}");
}

#[test]
fn elementary_scaled_integral_approaches_its_limit() {
    let a = [10.0, 100.0, 1e3, 1e4];
    let r = elementary_bound_check(0.5, &a).unwrap();
    assert!(r.pass, "{r:?}");
    let scaled: Vec<f64> = r.samples.iter().map(|s| s[2]).collect();
    assert!(scaled.windows(2).all(|w| w[1] > w[0]), "{scaled:?}");
    assert!(LIMIT_MU_HALF - scaled[3] < 0.02, "{scaled:?}");
}

#[test]
fn elementary_bound_holds_near_one() {
    let r = elementary_bound_check(0.95, &[0.0, 1.0, 10.0, 100.0, 1e3, 1e4]).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.observed.is_finite() && r.observed > 1.0);
}

#[test]
fn elementary_rejects_bad_input() {
    assert!(elementary_bound_check(1.0, &[1.0]).is_err());
    assert!(elementary_bound_check(0.5, &[1e5]).is_err());
    assert!(elementary_bound_check(0.5, &[]).is_err());
}

fn small(checks: &[&str]) -> ConformanceConfig {
    ConformanceConfig {
        samples: 3,
        calibration_samples: 50,
        checks: checks.iter().map(|c| c.to_string()).collect(),
        n: 32,
        y_max: 20.0,
        ny: 128,
        z_lines: default_z_lines().into_iter().take(2).collect(),
        ..Default::default()
    }
}

#[test]
fn free_model_passes_with_degenerate_slopes() {
    let m = HamiltonianModel::free(2);
    let reports = run_conformance(&m, &ConformanceConfig { checks: vec![], ..small(&[]) });
    let ids: Vec<&str> = reports.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(&ids[..CHECK_IDS.len()], &CHECK_IDS[..]);
    for r in &reports {
        assert!(r.pass, "{r:?}");
    }
    for id in ["momentum_drift", "position_drift", "phi_remainder_decay", "eikonal_phase_decay", "theta_decay"] {
        let r = reports.iter().find(|r| r.id == id).unwrap();
        assert_eq!(r.status, CheckStatus::DegeneratePass, "{id}");
    }
    assert!(reports.iter().any(|r| r.status == CheckStatus::Skipped && r.diagnostic.is_some()));
}

#[test]
fn misconfigured_model_reports_failures() {
    let m = HamiltonianModel::new(2, P0Family::Quadratic, Potential::Isotropic, 10.0, 0.99, 10.0, (0.45, 0.55), Some(0.01)).unwrap();
    let cfg = small(&["convexity", "jacobian_det", "momentum_drift", "position_drift", "eikonal_residual"]);
    let reports = run_conformance(&m, &cfg);
    assert_eq!(reports.len(), 5);
    let failed: Vec<&EstimateReport> = reports.iter().filter(|r| !r.pass).collect();
    assert!(!failed.is_empty(), "{reports:#?}");
    for r in failed {
        assert_eq!(r.status, CheckStatus::Fail);
        assert!(r.diagnostic.is_some() || r.observed.is_finite(), "{r:?}");
    }
}

#[test]
fn reports_are_reproducible() {
    let m = HamiltonianModel::reference();
    let cfg = small(&["jacobian_det", "eikonal_residual", "elementary_bound"]);
    let a = run_conformance(&m, &cfg);
    let b = run_conformance(&m, &cfg);
    assert_eq!(a, b);
}

#[test]
fn bundle_layout() {
    let m = HamiltonianModel::reference();
    let mut reports = run_conformance(&m, &small(&["elementary_bound", "surface_measure", "free_smatrix_identity"]));
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &mut reports, "abc123").unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let arr = json.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for e in arr {
        for key in ["id", "description", "expected", "observed", "tolerance", "pass", "config_hash"] {
            assert!(e.get(key).is_some(), "missing {key} in {e}");
        }
        assert_eq!(e["config_hash"], "abc123");
    }
    let uri = arr[0]["samples_uri"].as_str().unwrap();
    let csv = std::fs::read_to_string(dir.path().join(uri)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# config_sha256=abc123"));
    assert_eq!(lines.next(), Some("a,integral,scaled"));
    assert_eq!(lines.count(), arr[0]["sample_columns"].as_array().map(|_| reports[0].samples.len()).unwrap());
    assert!(arr[2].get("samples_uri").is_none());
}

//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use lrscat::model::HamiltonianModel;
use lrscat::verify::*;

const SEED: u64 = 42;

fn line(n: usize, name: &str, pass: bool, detail: &str) {
    println!("acceptance {n:>2} {name:<36} {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn max_observed(r: &EstimateReport) -> f64 {
    assert!(r.observed.is_finite(), "{} aborted: {:?}", r.id, r.diagnostic);
    r.observed
}

fn reference() -> HamiltonianModel {
    HamiltonianModel::reference()
}

#[test]
fn criterion_01_free_identity() {
    let start = Instant::now();
    let r = check_free_smatrix(&reference()).unwrap();
    let elapsed = start.elapsed();
    let dev = max_observed(&r);
    let pass = dev < 1e-8 && elapsed < Duration::from_secs(60);
    line(1, "free S-matrix identity", pass, &format!("max|S-I| = {dev:.3e} (< 1e-8), {:.1} s (< 60 s)", elapsed.as_secs_f64()));
    assert!(dev < 1e-8);
    assert!(elapsed < Duration::from_secs(60));
}

#[test]
fn criterion_02_eikonal_residual() {
    let r = check_eikonal_residual(&reference(), 50, SEED).unwrap();
    assert_eq!(r.samples.len(), 50);
    assert!(r.samples.iter().all(|s| (20.0..=200.0).contains(&s[0])));
    let worst = max_observed(&r);
    line(2, "eikonal residual", worst < 1e-6, &format!("max = {worst:.3e} (< 1e-6) over 50 points"));
    assert!(r.samples.iter().all(|s| s[2] < 1e-6));
}

#[test]
fn criterion_03_map_equivalence() {
    let r = check_map_equivalence(&reference(), 100, SEED).unwrap();
    assert_eq!(r.samples.len(), 100);
    let worst = max_observed(&r);
    line(3, "generating-map equivalence", worst < 1e-5, &format!("max rel = {worst:.3e} (< 1e-5) over 100 points"));
    assert!(worst < 1e-5);
}

#[test]
fn criterion_04_hessian_identity() {
    let r = check_hessian_identity(&reference(), 20, SEED).unwrap();
    assert_eq!(r.samples.len(), 20);
    let worst = max_observed(&r);
    line(4, "Hessian identity", worst < 1e-4, &format!("max rel = {worst:.3e} (< 1e-4) over 20 points"));
    assert!(worst < 1e-4);
}

#[test]
fn criterion_05_decay_fits() {
    let m = reference();
    let fits = [
        (check_eikonal_phase(&m).unwrap(), 0.5),
        (check_phi_remainder(&m).unwrap(), 0.5),
        (check_momentum_drift(&m).unwrap(), -0.5),
        (check_theta_decay(&m).unwrap(), -0.5),
        (check_position_drift(&m).unwrap(), 0.5),
    ];
    let mut all = true;
    let mut detail = String::new();
    for (r, expected) in &fits {
        let slope = max_observed(r);
        let ok = r.status == CheckStatus::Pass && (slope - expected).abs() <= 0.1;
        all &= ok;
        detail.push_str(&format!("{} {slope:.3} ({expected:+.1} +/- 0.1); ", r.id));
    }
    line(5, "decay fits", all, &detail);
    for (r, expected) in &fits {
        assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        assert!((r.observed - expected).abs() <= 0.1, "{}: {}", r.id, r.observed);
    }
}

#[test]
fn criterion_06_jacobian_bound() {
    let (m, cal) = reference().calibrated(500, SEED).unwrap();
    let r = check_jacobian_det(&m, 100, SEED).unwrap();
    assert_eq!(r.samples.len(), 100);
    let min = max_observed(&r);
    line(6, "momentum Jacobian bound", min >= 0.5, &format!("min det = {min:.4} (>= 0.5), R = {}", cal.radius));
    assert!(min >= 0.5);
}

#[test]
fn criterion_07_elementary_integral() {
    let a: Vec<f64> = (0..=12).map(|k| 10f64.powf(1.0 + 0.25 * k as f64)).collect();
    let r = elementary_bound_check(0.5, &a).unwrap();
    let limit = elementary_limit(0.5).unwrap();
    let scaled: Vec<f64> = r.samples.iter().map(|s| s[2]).collect();
    let sup = scaled.iter().cloned().fold(0.0, f64::max);
    let lx: Vec<f64> = a[8..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = scaled[8..].iter().map(|v| v.ln()).collect();
    let trend = lrscat::numerics::linear_fit(&lx, &ly).0;
    let pass = sup <= limit * (1.0 + 1e-9) && trend <= 0.1;
    line(7, "elementary integral bound", pass, &format!("sup = {sup:.5} (<= limit {limit:.5}), top-decade slope {trend:.2e} (<= 0.1)"));
    assert!(r.pass);
    assert!(sup <= limit * (1.0 + 1e-9));
    assert!(trend <= 0.1);
}

#[test]
fn criterion_08_flow_invariance() {
    let r = check_invariance(&reference(), 20, SEED).unwrap();
    assert_eq!(r.samples.len(), 20);
    let worst = max_observed(&r);
    line(8, "flow-direction invariance", worst < 1e-6, &format!("max dev = {worst:.3e} (< 1e-6), t in [-10, 10]"));
    assert!(worst < 1e-6);
}

#[test]
fn criterion_09_z_integral() {
    let lines = default_z_lines();
    assert_eq!(lines.len(), 10);
    let r = check_z_integral(&reference(), &lines).unwrap();
    let worst = max_observed(&r);
    line(9, "Z-integral identity", worst < 1e-3, &format!("max |quad - i| = {worst:.3e} (< 1e-3) on 10 lines"));
    assert!(worst < 1e-3);
}

#[test]
fn criterion_10_unitarity_trend() {
    let start = Instant::now();
    let (defect, halved) = unitarity_pair(&reference(), 0.5, 128, 60.0, 1024).unwrap();
    let elapsed = start.elapsed();
    let pass = defect <= 0.1 && halved < defect && elapsed < Duration::from_secs(600);
    line(
        10,
        "unitarity trend",
        pass,
        &format!("defect {defect:.3e} (<= 0.1), c/2 {halved:.3e} (< defect), {:.0} s (< 600 s)", elapsed.as_secs_f64()),
    );
    assert!(defect <= 0.1);
    assert!(halved < defect);
    assert!(elapsed < Duration::from_secs(600));
}

#[test]
fn criterion_11_interaction_picture() {
    let r = check_interaction_picture(&reference(), 50, SEED).unwrap();
    assert_eq!(r.samples.len(), 50);
    assert!(r.samples.iter().all(|s| s[1] <= 1e3));
    let worst = max_observed(&r);
    line(11, "interaction-picture equivalence", worst < 1e-7, &format!("max = {worst:.3e} (< 1e-7) on 50 data"));
    assert!(worst < 1e-7);
}

#[test]
fn criterion_12_surface_measure() {
    let m = reference();
    let (a, b) = m.interval();
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        let lambda = a + (b - a) * k as f64 / 10.0;
        for n in [16, 64, 128, 256] {
            let g = lrscat::smatrix::build_surface(&m, lambda, n).unwrap();
            worst = worst.max((g.total_measure() - 2.0 * std::f64::consts::PI).abs());
        }
    }
    line(12, "surface measure", worst <= 1e-12, &format!("max |sum w - 2 pi| = {worst:.3e} (<= 1e-12), 11 energies"));
    assert!(worst <= 1e-12);
}

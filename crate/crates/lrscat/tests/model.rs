mod common;

use std::f64::consts::PI;

use common::log_slope;
use lrscat::model::{HamiltonianModel, ModelError, P0Family, Potential};
use lrscat::numerics::{dot, norm};
use proptest::prelude::*;

fn family(p0: P0Family, potential: Potential) -> HamiltonianModel {
    let interval = match p0 {
        P0Family::Quadratic => (0.45, 0.55),
        P0Family::Relativistic => (1.2, 1.3),
        P0Family::Cosine => (0.45, 0.55),
    };
    HamiltonianModel::new(2, p0, potential, 0.1, 0.5, 10.0, interval, None).unwrap()
}

/// Fourth-order central difference of a scalar function along coordinate i.
fn fd4(f: impl Fn(&[f64]) -> f64, at: &[f64], i: usize, h: f64) -> f64 {
    let mut p = at.to_vec();
    let mut g = |s: f64| {
        p[i] = at[i] + s;
        f(&p)
    };
    (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
}

#[test]
fn p0_examples() {
    let q = family(P0Family::Quadratic, Potential::Zero);
    let r = family(P0Family::Relativistic, Potential::Zero);
    let c = family(P0Family::Cosine, Potential::Zero);
    assert_eq!(q.eval_p0(&[1.0, 0.0]), 0.5);
    assert_eq!(r.eval_p0(&[0.0, 0.0]), 1.0);
    assert!((c.eval_p0(&[PI, PI]) - 4.0).abs() < 1e-15);
}

#[test]
fn velocity_examples() {
    let q = family(P0Family::Quadratic, Potential::Zero);
    let r = family(P0Family::Relativistic, Potential::Zero);
    let c = family(P0Family::Cosine, Potential::Zero);
    assert_eq!(q.eval_v(&[1.0, 2.0]), vec![1.0, 2.0]);
    let v = r.eval_v(&[3.0, 4.0]);
    let s = 26f64.sqrt();
    assert!((v[0] - 3.0 / s).abs() < 1e-15 && (v[1] - 4.0 / s).abs() < 1e-15);
    let v = c.eval_v(&[PI / 2.0, 0.0]);
    assert!((v[0] - 1.0).abs() < 1e-15 && v[1] == 0.0);
}

#[test]
fn cutoff_potential_examples() {
    let m = HamiltonianModel::reference();
    assert_eq!(m.eval_vr(&[5.0, 0.0], &[1.0, 0.0]), 0.0);
    let v = m.eval_vr(&[30.0, 0.0], &[1.0, 0.0]);
    assert!((v - 0.1 * 901f64.powf(-0.25)).abs() < 1e-15);
    assert!((v - 0.018257).abs() < 1e-5);
    let z = HamiltonianModel::free(2);
    for x in [[0.0, 0.0], [15.0, 3.0], [1e4, -2.0]] {
        assert_eq!(z.eval_vr(&x, &[1.0, 0.0]), 0.0);
    }
}

#[test]
fn cutoff_is_exact_outside_the_shell() {
    for pot in [Potential::Isotropic, Potential::Anisotropic { epsilon: 0.5 }] {
        let m = family(P0Family::Quadratic, pot);
        for k in 0..200 {
            let a = 0.1 * k as f64;
            let dir = [a.cos(), a.sin()];
            let inner = 10.0 * k as f64 / 200.0;
            let outer = 20.0 + 5.0 * k as f64;
            let xi = [0.3, -0.8];
            assert_eq!(m.eval_vr(&[inner * dir[0], inner * dir[1]], &xi), 0.0);
            let xo = [outer * dir[0], outer * dir[1]];
            assert_eq!(m.eval_vr(&xo, &xi), m.eval_v_uncut(&xo));
        }
    }
}

#[test]
fn hamiltonian_examples() {
    let z = HamiltonianModel::free(2);
    assert_eq!(z.eval_p(&[3.0, 4.0], &[1.0, 1.0]), 1.0);
    assert_eq!(z.grad_x_p(&[30.0, 4.0], &[1.0, 1.0]), vec![0.0, 0.0]);
    let m = HamiltonianModel::reference();
    let p = m.eval_p(&[30.0, 0.0], &[1.0, 0.0]);
    assert!((p - (0.5 + 0.1 * 901f64.powf(-0.25))).abs() < 1e-15);
}

#[test]
fn spatial_gradient_matches_fd() {
    for pot in [Potential::Isotropic, Potential::Anisotropic { epsilon: 0.5 }] {
        let m = family(P0Family::Quadratic, pot);
        // points inside the shell, across it and far out
        for (k, r) in [10.5, 12.0, 15.0, 19.5, 25.0, 80.0, 1e3].iter().enumerate() {
            let a = 0.7 + k as f64;
            let x = [r * a.cos(), r * a.sin()];
            let xi = [0.6, 0.8];
            let g = m.grad_x_p(&x, &xi);
            let h = 1e-4 * r.max(1.0);
            // p₀ is x-independent; differencing V_R avoids cancelling against p₀
            let fd: Vec<f64> = (0..2).map(|i| fd4(|q| m.eval_vr(q, &xi), &x, i, h)).collect();
            let err = norm(&[g[0] - fd[0], g[1] - fd[1]]) / norm(&g);
            assert!(err < 1e-7, "r {r} err {err:e}");
        }
    }
}

fn any_family() -> impl Strategy<Value = P0Family> {
    prop_oneof![Just(P0Family::Quadratic), Just(P0Family::Relativistic), Just(P0Family::Cosine)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn velocity_is_gradient_of_p0(p0 in any_family(), r in 0.0..5.0f64, a in 0.0..(2.0 * PI)) {
        let m = family(p0, Potential::Zero);
        let xi = [r * a.cos(), r * a.sin()];
        let v = m.eval_v(&xi);
        // relative error is undefined at critical points of p₀
        prop_assume!(norm(&v) > 1e-6);
        let fd: Vec<f64> = (0..2).map(|i| fd4(|q| m.eval_p0(q), &xi, i, 1e-3)).collect();
        let err = norm(&[v[0] - fd[0], v[1] - fd[1]]) / norm(&v);
        prop_assert!(err < 1e-7, "err {err:e} at {xi:?}");
    }

    #[test]
    fn hamiltonian_field_is_consistent(r in 0.0..60.0f64, a in 0.0..(2.0 * PI), k in 0.0..(2.0 * PI)) {
        let m = HamiltonianModel::reference();
        let x = [r * a.cos(), r * a.sin()];
        let xi = [k.cos(), k.sin()];
        let (mut dx, mut dxi) = ([0.0; 2], [0.0; 2]);
        m.field_into(&x, &xi, &mut dx, &mut dxi);
        let gx = m.grad_x_p(&x, &xi);
        prop_assert_eq!(dx.to_vec(), m.grad_xi_p(&x, &xi));
        prop_assert_eq!(dxi.to_vec(), vec![-gx[0], -gx[1]]);
    }
}

#[test]
fn potential_decay_slope() {
    let m = HamiltonianModel::reference();
    let rs: Vec<f64> = (0..=20).map(|k| 10f64.powf(2.0 + 0.1 * k as f64)).collect();
    let vs: Vec<f64> = rs.iter().map(|r| m.eval_v_uncut(&[*r * 0.6, *r * 0.8]).abs()).collect();
    let s = log_slope(&rs, &vs);
    assert!((s + 0.5).abs() < 0.05, "slope {s}");
}

#[test]
fn symbol_bounds() {
    for pot in [Potential::Isotropic, Potential::Anisotropic { epsilon: 0.5 }] {
        let m = family(P0Family::Quadratic, pot);
        let mu = m.mu();
        let mut sup = [0.0f64; 3];
        let (mut rs, mut tail) = (Vec::new(), [Vec::new(), Vec::new(), Vec::new()]);
        for k in 0..=40 {
            let r = 10f64.powf(0.1 * k as f64);
            let x = [0.8 * r, -0.6 * r];
            let jx = (1.0 + r * r).sqrt();
            let h = 1e-3 * r.max(1.0);
            let v0 = m.eval_v_uncut(&x).abs();
            let d1: f64 = (0..2).map(|i| fd4(|q| m.eval_v_uncut(q), &x, i, h).abs()).fold(0.0, f64::max);
            let d2: f64 = (0..2).map(|i| fd4(|q| fd4(|p| m.eval_v_uncut(p), q, i, h), &x, i, h).abs()).fold(0.0, f64::max);
            let w = [v0 * jx.powf(mu), d1 * jx.powf(mu + 1.0), d2 * jx.powf(mu + 2.0)];
            if k >= 20 {
                rs.push(r);
            }
            for j in 0..3 {
                sup[j] = sup[j].max(w[j]);
                if k >= 20 {
                    tail[j].push(w[j]);
                }
            }
        }
        for j in 0..3 {
            assert!(sup[j].is_finite() && sup[j] < 1.0, "order {j}: sup {}", sup[j]);
            // no growth trend over the last two decades
            let s = log_slope(&rs, &tail[j]);
            assert!(s.abs() < 0.05, "order {j}: weighted slope {s}");
        }
    }
}

/// {f,g} = ∂_ξf·∂ₓg − ∂ₓf·∂_ξg with every derivative by nested central FD of eval_p.
fn nested_fd_bracket(m: &HamiltonianModel, x: &[f64], xi: &[f64]) -> f64 {
    let hx = 1e-3 * norm(x).max(1.0);
    let hxi = 1e-3 * norm(xi).max(1.0);
    let split = |z: &[f64]| (z[..2].to_vec(), z[2..].to_vec());
    let p = |z: &[f64]| {
        let (a, b) = split(z);
        m.eval_p(&a, &b)
    };
    let inner = |z: &[f64]| {
        let (a, _) = split(z);
        2.0 * (0..2).map(|i| a[i] * fd4(p, z, 2 + i, hxi)).sum::<f64>()
    };
    let z: Vec<f64> = x.iter().chain(xi).copied().collect();
    (0..2).map(|i| fd4(inner, &z, i, hx) * fd4(p, &z, 2 + i, hxi) - fd4(inner, &z, 2 + i, hxi) * fd4(p, &z, i, hx)).sum()
}

#[test]
fn double_bracket_examples() {
    let z = HamiltonianModel::free(2);
    for xi in [[1.0, 0.0], [0.3, -0.7], [2.0, 1.5]] {
        let b = z.poisson_double_bracket(&[4.0, -3.0], &xi);
        assert!((b - 2.0 * dot(&xi, &xi)).abs() < 1e-6);
    }
    assert!(z.poisson_double_bracket(&[4.0, -3.0], &[0.0, 0.0]).abs() < 1e-6);
    let m = HamiltonianModel::reference();
    let (x, xi) = ([50.0, 0.0], [1.0, 0.0]);
    let b = m.poisson_double_bracket(&x, &xi);
    let oracle = nested_fd_bracket(&m, &x, &xi);
    assert!(((b - oracle) / oracle).abs() < 1e-4, "{b} vs {oracle}");
    assert!((b - 2.0).abs() < 0.1 && b != 2.0);
}

#[test]
fn free_calibration_accepts_initial_radius() {
    let z = HamiltonianModel::free(2);
    let cal = z.calibrate_radius(500, 42).unwrap();
    assert_eq!(cal.doublings, 0);
    assert_eq!(cal.radius, z.radius());
    let oracle =
        z.sample_energy_shell(5, 500, 1e3, 42).iter().map(|p| 2.0 * dot(&z.eval_v(&p.xi), &z.eval_v(&p.xi))).fold(f64::INFINITY, f64::min);
    assert!((cal.c5 - oracle).abs() < 1e-6);
}

#[test]
fn reference_calibration_and_resampling() {
    let m = HamiltonianModel::reference();
    let (cm, cal) = m.calibrated(2000, 42).unwrap();
    assert!(cal.radius.is_finite() && cal.c5 > 0.0);
    assert_eq!(cm.c5(), Some(cal.c5));
    let fresh = cm.bracket_minimum(2000, 4242);
    assert!(fresh >= 0.95 * cal.c5, "fresh {fresh} c5 {}", cal.c5);
    assert!((fresh - cal.c5).abs() <= 0.05 * cal.c5, "fresh {fresh} c5 {}", cal.c5);
}

#[test]
fn strong_coupling_fails_calibration() {
    let m = HamiltonianModel::new(2, P0Family::Quadratic, Potential::Isotropic, 1e6, 0.1, 10.0, (0.45, 0.55), None).unwrap();
    match m.calibrate_radius(200, 42) {
        Err(ModelError::CalibrationFailed { doublings, min_bracket, .. }) => {
            assert_eq!(doublings, 20);
            assert!(min_bracket < 0.0);
        }
        other => panic!("expected CalibrationFailed, got {other:?}"),
    }
}

#[test]
fn constructor_validation() {
    let mk = |d, mu, r, i, e| HamiltonianModel::new(d, P0Family::Quadratic, Potential::Isotropic, 0.1, mu, r, i, e);
    assert!(matches!(mk(0, 0.5, 10.0, (0.45, 0.55), None), Err(ModelError::Dimension(0))));
    assert!(matches!(mk(2, 1.0, 10.0, (0.45, 0.55), None), Err(ModelError::Mu(_))));
    assert!(matches!(mk(2, 0.0, 10.0, (0.45, 0.55), None), Err(ModelError::Mu(_))));
    assert!(matches!(mk(2, 0.5, -1.0, (0.45, 0.55), None), Err(ModelError::Radius(_))));
    assert!(matches!(mk(2, 0.5, 10.0, (0.55, 0.45), None), Err(ModelError::Interval(..))));
    assert!(matches!(mk(2, 0.5, 10.0, (0.45, 0.55), Some(0.0)), Err(ModelError::Margin(_))));
    let m = mk(2, 0.5, 10.0, (0.45, 0.55), None).unwrap();
    assert!((m.epsilon0() - 0.01).abs() < 1e-15);
    assert!(m.c4() > 0.0);
}

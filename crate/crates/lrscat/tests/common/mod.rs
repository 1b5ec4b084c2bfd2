#![allow(dead_code)]

use lrscat::model::HamiltonianModel;

/// Classical fourth-order Runge–Kutta with a fixed step; an independent oracle.
pub fn rk4_flow(model: &HamiltonianModel, x0: &[f64], xi0: &[f64], t: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let d = x0.len();
    let steps = (t.abs() / h).round() as usize;
    let h = t / steps as f64;
    let f = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; 2 * d];
        let (dx, dxi) = out.split_at_mut(d);
        model.field_into(&y[..d], &y[d..], dx, dxi);
        out
    };
    let mut y: Vec<f64> = x0.iter().chain(xi0).copied().collect();
    for _ in 0..steps {
        let k1 = f(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = f(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = f(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = f(&y4);
        for i in 0..2 * d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[..d].to_vec(), y[d..].to_vec())
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Composite Simpson rule on equally spaced samples (even number of intervals).
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len() - 1;
    assert!(n.is_multiple_of(2), "Simpson needs an even number of intervals");
    let mut s = samples[0] + samples[n];
    for (i, v) in samples.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Fixed-step RK4 trajectory samples (x, ξ) at every step, step h.
pub fn rk4_samples(model: &HamiltonianModel, x0: &[f64], xi0: &[f64], t: f64, h: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let steps = (t.abs() / h).round() as usize;
    let h = t / steps as f64;
    let mut out = vec![(x0.to_vec(), xi0.to_vec())];
    let (mut x, mut xi) = (x0.to_vec(), xi0.to_vec());
    for _ in 0..steps {
        let (nx, nxi) = rk4_flow(model, &x, &xi, h, h);
        x = nx;
        xi = nxi;
        out.push((x.clone(), xi.clone()));
    }
    out
}

pub fn log_slope(scales: &[f64], values: &[f64]) -> f64 {
    let lx: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    lrscat::numerics::linear_fit(&lx, &ly).0
}

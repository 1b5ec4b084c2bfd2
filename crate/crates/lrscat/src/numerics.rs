//! Small numerical helpers shared by the modules: vector algebra, the C^∞ step,
//! finite differences, dense linear algebra, adaptive quadrature and seeded
//! low-discrepancy sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// ⟨x⟩ = (1+|x|²)^{1/2}
pub fn japanese(a: &[f64]) -> f64 {
    (1.0 + dot(a, a)).sqrt()
}

/// ⟨x;t⟩ = (1+|x|²+t²)^{1/2}
pub fn japanese_t(a: &[f64], t: f64) -> f64 {
    (1.0 + dot(a, a) + t * t).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| alpha * a).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn bump(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn bump_deriv(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp() / (u * u)
    } else {
        0.0
    }
}

/// C^∞ monotone step: 0 for s ≤ 1, 1 for s ≥ 2.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 1.0 {
        return 0.0;
    }
    if s >= 2.0 {
        return 1.0;
    }
    let a = bump(s - 1.0);
    let b = bump(2.0 - s);
    a / (a + b)
}

pub fn smooth_step_deriv(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        return 0.0;
    }
    let a = bump(s - 1.0);
    let b = bump(2.0 - s);
    let da = bump_deriv(s - 1.0);
    let db = -bump_deriv(2.0 - s);
    (da * b - a * db) / ((a + b) * (a + b))
}

/// Step rising from 0 at `lo` to 1 at `hi`.
pub fn ramp(v: f64, lo: f64, hi: f64) -> f64 {
    smooth_step(1.0 + (v - lo) / (hi - lo))
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function; entry (i,j) = ∂f_i/∂x_j.
pub fn fd_jacobian<F: FnMut(&[f64]) -> Vec<f64>>(mut f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let mut p = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        p[j] = x[j] + h;
        let fp = f(&p);
        p[j] = x[j] - h;
        let fm = f(&p);
        p[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(m, x.len(), |i, j| cols[j][i])
}

pub fn det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

pub fn solve(m: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.clone().lu().solve(&rhs).map(|v| v.as_slice().to_vec())
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("adaptive quadrature did not reach tolerance (estimate {estimate}, error {error})")]
pub struct QuadratureFailure {
    pub estimate: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on [a,b], started from
/// `panels` equal subintervals.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64, QuadratureFailure> {
    let n = panels.max(1);
    let mut segs: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / n as f64;
            let hi = a + (b - a) * (i + 1) as f64 / n as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if segs.len() >= max_intervals {
            return Err(QuadratureFailure { estimate: total, error: err });
        }
        let (k, _) = segs.iter().enumerate().fold((0, -1.0), |acc, (i, s)| if s.3 > acc.1 { (i, s.3) } else { acc });
        let (lo, hi, _, _) = segs.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
}

/// ∫_a^∞ f via t = a + s/(1−s).
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<f64, QuadratureFailure> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - s;
            f(a + s / om) / (om * om)
        },
        0.0,
        1.0,
        8,
        abs_tol,
        rel_tol,
        20_000,
    )
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Halton sequence with a seeded Cranley–Patterson rotation.
#[derive(Debug, Clone)]
pub struct ScrambledHalton {
    shift: Vec<f64>,
    index: u64,
}

impl ScrambledHalton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Self { shift, index: 1 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift.iter().enumerate().map(|(k, s)| (radical_inverse(i, PRIMES[k]) + s).fract()).collect()
    }
}

/// Unit vector in ℝ^d from d−1 uniform coordinates (d ≤ 3).
pub fn unit_vector(d: usize, u: &[f64]) -> Vec<f64> {
    match d {
        1 => vec![if u[0] < 0.5 { -1.0 } else { 1.0 }],
        2 => {
            let a = 2.0 * std::f64::consts::PI * u[0];
            vec![a.cos(), a.sin()]
        }
        _ => {
            let z = 2.0 * u[0] - 1.0;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = 2.0 * std::f64::consts::PI * u[1];
            let mut v = vec![r * a.cos(), r * a.sin(), z];
            v.resize(d, 0.0);
            v
        }
    }
}

/// Bisection for a sign change of `f` on [lo,hi].
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

//! Explicit integrators: adaptive Dormand–Prince 5(4) with dense output and a
//! fixed-step Gragg–Bulirsch–Stoer extrapolation step.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Dp5Options {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dp5Options {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, h_init: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

/// Accepted steps of a DP5 run with continuous extension.
#[derive(Debug, Clone)]
pub struct Dp5Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    steps: Vec<DenseStep>,
}

impl Dp5Solution {
    pub fn final_state(&self) -> &[f64] {
        self.y.last().expect("solution has at least one state")
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("solution has at least one time")
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Dense-output evaluation at any t between the endpoints.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.steps.is_empty() {
            return self.y[0].clone();
        }
        let forward = self.t_end() >= self.t[0];
        let key = |s: &DenseStep| if forward { s.t0 } else { -s.t0 };
        let target = if forward { t } else { -t };
        let idx = self.steps.partition_point(|s| key(s) <= target).saturating_sub(1);
        let s = &self.steps[idx.min(self.steps.len() - 1)];
        let th = (t - s.t0) / s.h;
        let th1 = 1.0 - th;
        (0..s.r[0].len()).map(|i| s.r[0][i] + th * (s.r[1][i] + th1 * (s.r[2][i] + th * (s.r[3][i] + th1 * s.r[4][i])))).collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates y' = f(t, y) from t0 to t1 (either direction).
pub fn dp5<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &Dp5Options) -> Result<Dp5Solution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut sol = Dp5Solution { t: vec![t0], y: vec![y0.to_vec()], steps: Vec::new() };
    if t1 == t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    f(t, &y, &mut k1);
    let span = (t1 - t0).abs();
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let sc: Vec<f64> = y.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).collect();
            let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
            let d0 = rms(&y);
            let d1 = rms(&k1);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(span);
            for i in 0..n {
                ys[i] = y[i] + dir * h0 * k1[i];
            }
            f(t0 + dir * h0, &ys, &mut k2);
            let diff: Vec<f64> = (0..n).map(|i| k2[i] - k1[i]).collect();
            let d2 = rms(&diff) / h0;
            let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
            (100.0 * h0).min(h1)
        }
    };
    h = h.min(opts.h_max).min(span);
    let mut steps = 0;
    let mut rejected_last = false;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        let hs = h * dir;
        for i in 0..n {
            ys[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + hs, &ys, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        f(t_new, &y1, &mut k7);
        steps += 1;
        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            let r0 = y.clone();
            let r1: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
            let r2: Vec<f64> = (0..n).map(|i| hs * k1[i] - r1[i]).collect();
            let r3: Vec<f64> = (0..n).map(|i| r1[i] - hs * k7[i] - r2[i]).collect();
            let r4: Vec<f64> = (0..n).map(|i| hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])).collect();
            sol.steps.push(DenseStep { t0: t, h: hs, r: [r0, r1, r2, r3, r4] });
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite(t));
            }
            sol.t.push(t);
            sol.y.push(y.clone());
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h = (h * fac).min(opts.h_max);
            if last {
                break;
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok(sol)
}

/// Harmonic step-number sequence for the extrapolation tableau.
pub const GBS_SEQUENCE: [usize; 5] = [2, 4, 6, 8, 10];

/// One Gragg–Bulirsch–Stoer step of size h with a fixed extrapolation order.
/// The result is a smooth function of (t, y, h).
pub fn gbs_step<F>(f: &mut F, t: f64, y: &[f64], h: f64, work: &mut GbsWork) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let inc = gbs_increment(f, t, y, h, work);
    y.iter().zip(&inc).map(|(a, b)| a + b).collect()
}

/// The increment y(t+h) − y(t) of one extrapolated step. Substeps are carried
/// as offsets from `y`, so rounding scales with the increment, not with |y|.
pub fn gbs_increment<F>(f: &mut F, t: f64, y: &[f64], h: f64, work: &mut GbsWork) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    work.ensure(n);
    f(t, y, &mut work.f0);
    let mut prev: Vec<Vec<f64>> = Vec::new();
    for (j, &m) in GBS_SEQUENCE.iter().enumerate() {
        let hm = h / m as f64;
        let (d0, d1, fz, at) = (&mut work.z0, &mut work.z1, &mut work.fz, &mut work.at);
        d0.iter_mut().for_each(|v| *v = 0.0);
        for (d, f0) in d1[..n].iter_mut().zip(&work.f0[..n]) {
            *d = hm * f0;
        }
        for k in 1..m {
            for i in 0..n {
                at[i] = y[i] + d1[i];
            }
            f(t + k as f64 * hm, at, fz);
            for i in 0..n {
                let d2 = d0[i] + 2.0 * hm * fz[i];
                d0[i] = d1[i];
                d1[i] = d2;
            }
        }
        for i in 0..n {
            at[i] = y[i] + d1[i];
        }
        f(t + h, at, fz);
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(j + 1);
        cur.push((0..n).map(|i| 0.5 * (d0[i] + d1[i] + hm * fz[i])).collect());
        for k in 1..=j {
            let ratio = (m as f64 / GBS_SEQUENCE[j - k] as f64).powi(2) - 1.0;
            let next: Vec<f64> = (0..n).map(|i| cur[k - 1][i] + (cur[k - 1][i] - prev[k - 1][i]) / ratio).collect();
            cur.push(next);
        }
        prev = cur;
    }
    prev.pop().expect("tableau is non-empty")
}

#[derive(Debug, Default, Clone)]
pub struct GbsWork {
    f0: Vec<f64>,
    z0: Vec<f64>,
    z1: Vec<f64>,
    fz: Vec<f64>,
    at: Vec<f64>,
}

impl GbsWork {
    fn ensure(&mut self, n: usize) {
        if self.f0.len() != n {
            self.f0 = vec![0.0; n];
            self.z0 = vec![0.0; n];
            self.z1 = vec![0.0; n];
            self.fz = vec![0.0; n];
            self.at = vec![0.0; n];
        }
    }
}

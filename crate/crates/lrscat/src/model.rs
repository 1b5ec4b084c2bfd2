//! Hamiltonian symbol families p = p₀(ξ) + χ₁(|x|/R)·V(x), their analytic first
//! derivatives, the double Poisson bracket and cutoff-radius calibration.

use serde::{Deserialize, Serialize};

use crate::numerics::{bisect, dot, norm, smooth_step, smooth_step_deriv, unit_vector, ScrambledHalton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum P0Family {
    Quadratic,
    Relativistic,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "family")]
pub enum Potential {
    Isotropic,
    Anisotropic { epsilon: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    Dimension(usize),
    #[error("decay exponent mu must lie in (0,1) (got {0})")]
    Mu(f64),
    #[error("cutoff radius must be positive (got {0})")]
    Radius(f64),
    #[error("energy interval [{0}, {1}] is invalid")]
    Interval(f64, f64),
    #[error("epsilon0 must be positive (got {0})")]
    Margin(f64),
    #[error("energy {0} is not attained by p0 along direction {1:?}")]
    EnergyOutOfRange(f64, Vec<f64>),
    #[error("velocity nearly vanishes on the enlarged energy shell (min |v| = {0:e})")]
    Degenerate(f64),
    #[error("anisotropy must satisfy |epsilon| < 1 (got {0})")]
    Anisotropy(f64),
    #[error("cutoff calibration failed after {doublings} doublings (last R = {radius}, min bracket = {min_bracket:e}, target {target:e})")]
    CalibrationFailed { doublings: usize, radius: f64, min_bracket: f64, target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        assert_eq!(x.len(), xi.len(), "x and xi must have equal length");
        Self { x, xi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }
}

/// Outcome of [`HamiltonianModel::calibrate_radius`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub radius: f64,
    pub c4: f64,
    pub c5: f64,
    pub momentum_bound: f64,
    pub doublings: usize,
}

/// Immutable Hamiltonian model. All evaluators are pure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianModel {
    d: usize,
    p0: P0Family,
    potential: Potential,
    coupling: f64,
    mu: f64,
    radius: f64,
    e0: f64,
    e1: f64,
    eps0: f64,
    c4: f64,
    v_max: f64,
    momentum_bound: f64,
    c5: Option<f64>,
}

pub const DEFAULT_RADIUS: f64 = 10.0;
pub const DEFAULT_ANISOTROPY: f64 = 0.5;
const DIRECTION_SAMPLES: usize = 256;

impl HamiltonianModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        p0: P0Family,
        potential: Potential,
        coupling: f64,
        mu: f64,
        radius: f64,
        interval: (f64, f64),
        epsilon0: Option<f64>,
    ) -> Result<Self, ModelError> {
        if !(1..=3).contains(&d) {
            return Err(ModelError::Dimension(d));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(ModelError::Mu(mu));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ModelError::Radius(radius));
        }
        let (e0, e1) = interval;
        if !(e0.is_finite() && e1.is_finite() && e0 <= e1) {
            return Err(ModelError::Interval(e0, e1));
        }
        let eps0 = epsilon0.unwrap_or(0.1 * (e1 - e0));
        if !(eps0 > 0.0) {
            return Err(ModelError::Margin(eps0));
        }
        if let Potential::Anisotropic { epsilon } = potential {
            if !(epsilon.abs() < 1.0) {
                return Err(ModelError::Anisotropy(epsilon));
            }
        }
        let mut m = Self { d, p0, potential, coupling, mu, radius, e0, e1, eps0, c4: 0.0, v_max: 0.0, momentum_bound: 0.0, c5: None };
        let (c4, v_max) = m.speed_range(6)?;
        if c4 < 1e-6 {
            return Err(ModelError::Degenerate(c4));
        }
        m.c4 = c4;
        m.v_max = v_max;
        m.momentum_bound = m.compute_momentum_bound();
        Ok(m)
    }

    /// Reference fixture: d=2, quadratic p₀, isotropic V with c=0.1, μ=0.5,
    /// I=[0.45,0.55], ε₀=0.01, R = 10 (the calibrated value is R_init here).
    pub fn reference() -> Self {
        Self::new(2, P0Family::Quadratic, Potential::Isotropic, 0.1, 0.5, DEFAULT_RADIUS, (0.45, 0.55), Some(0.01))
            .expect("reference model is valid")
    }

    pub fn free(d: usize) -> Self {
        Self::new(d, P0Family::Quadratic, Potential::Zero, 0.0, 0.5, DEFAULT_RADIUS, (0.45, 0.55), Some(0.01)).expect("free model is valid")
    }

    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn p0_family(&self) -> P0Family {
        self.p0
    }
    pub fn potential(&self) -> Potential {
        self.potential
    }
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn interval(&self) -> (f64, f64) {
        (self.e0, self.e1)
    }
    pub fn epsilon0(&self) -> f64 {
        self.eps0
    }
    pub fn c4(&self) -> f64 {
        self.c4
    }
    pub fn c5(&self) -> Option<f64> {
        self.c5
    }
    pub fn v_max(&self) -> f64 {
        self.v_max
    }
    pub fn momentum_bound(&self) -> f64 {
        self.momentum_bound
    }

    /// I_k = [E₀ − kε₀, E₁ + kε₀].
    pub fn nested_interval(&self, k: usize) -> (f64, f64) {
        (self.e0 - k as f64 * self.eps0, self.e1 + k as f64 * self.eps0)
    }

    pub fn in_interval(&self, k: usize, e: f64) -> bool {
        let (a, b) = self.nested_interval(k);
        e >= a && e <= b
    }

    pub fn is_free(&self) -> bool {
        matches!(self.potential, Potential::Zero) || self.coupling == 0.0
    }

    /// True when the model commutes with rotations of ℝ^d.
    pub fn is_rotation_invariant(&self) -> bool {
        let p0_ok = matches!(self.p0, P0Family::Quadratic | P0Family::Relativistic) || self.d == 1;
        p0_ok && (self.is_free() || matches!(self.potential, Potential::Isotropic))
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self, ModelError> {
        let mut m = Self::new(self.d, self.p0, self.potential, self.coupling, self.mu, radius, (self.e0, self.e1), Some(self.eps0))?;
        m.c5 = None;
        Ok(m)
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        let mut m = self.clone();
        m.coupling = coupling;
        m.c5 = None;
        m.momentum_bound = m.compute_momentum_bound();
        m
    }

    pub fn eval_p0(&self, xi: &[f64]) -> f64 {
        match self.p0 {
            P0Family::Quadratic => 0.5 * dot(xi, xi),
            P0Family::Relativistic => (1.0 + dot(xi, xi)).sqrt(),
            P0Family::Cosine => xi.iter().map(|v| 1.0 - v.cos()).sum(),
        }
    }

    pub fn eval_v(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xi.len()];
        self.v_into(xi, &mut out);
        out
    }

    pub fn v_into(&self, xi: &[f64], out: &mut [f64]) {
        match self.p0 {
            P0Family::Quadratic => out.copy_from_slice(xi),
            P0Family::Relativistic => {
                let g = (1.0 + dot(xi, xi)).sqrt();
                for (o, v) in out.iter_mut().zip(xi) {
                    *o = v / g;
                }
            }
            P0Family::Cosine => {
                for (o, v) in out.iter_mut().zip(xi) {
                    *o = v.sin();
                }
            }
        }
    }

    /// Uncut potential V(x).
    pub fn eval_v_uncut(&self, x: &[f64]) -> f64 {
        let w = (1.0 + dot(x, x)).powf(-0.5 * self.mu);
        match self.potential {
            Potential::Zero => 0.0,
            Potential::Isotropic => self.coupling * w,
            Potential::Anisotropic { epsilon } => {
                let jx = (1.0 + dot(x, x)).sqrt();
                self.coupling * w * (1.0 + epsilon * x[0] / jx)
            }
        }
    }

    fn grad_v_uncut_into(&self, x: &[f64], out: &mut [f64]) {
        let q = 1.0 + dot(x, x);
        let w = q.powf(-0.5 * self.mu);
        let dw = -self.mu * w / q;
        match self.potential {
            Potential::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Potential::Isotropic => {
                for (o, xv) in out.iter_mut().zip(x) {
                    *o = self.coupling * dw * xv;
                }
            }
            Potential::Anisotropic { epsilon } => {
                let jx = q.sqrt();
                let g = 1.0 + epsilon * x[0] / jx;
                for (i, (o, xv)) in out.iter_mut().zip(x).enumerate() {
                    let e1 = if i == 0 { 1.0 / jx } else { 0.0 };
                    let dg = epsilon * (e1 - x[0] * xv / (jx * jx * jx));
                    *o = self.coupling * (dw * xv * g + w * dg);
                }
            }
        }
    }

    /// χ₁(|x|/R)
    pub fn cutoff(&self, x: &[f64]) -> f64 {
        smooth_step(norm(x) / self.radius)
    }

    /// V_R(x,ξ) = χ₁(|x|/R)·V(x,ξ)
    pub fn eval_vr(&self, x: &[f64], _xi: &[f64]) -> f64 {
        if self.is_free() {
            return 0.0;
        }
        let chi = self.cutoff(x);
        if chi == 0.0 {
            0.0
        } else {
            chi * self.eval_v_uncut(x)
        }
    }

    /// ∂ₓV_R(x,ξ)
    pub fn grad_x_vr_into(&self, x: &[f64], out: &mut [f64]) {
        if self.is_free() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let r = norm(x);
        let s = r / self.radius;
        if s <= 1.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        self.grad_v_uncut_into(x, out);
        if s < 2.0 {
            let chi = smooth_step(s);
            let dchi = smooth_step_deriv(s) / (self.radius * r);
            let v = self.eval_v_uncut(x);
            for (o, xv) in out.iter_mut().zip(x) {
                *o = chi * *o + v * dchi * xv;
            }
        }
    }

    pub fn eval_p(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.eval_p0(xi) + self.eval_vr(x, xi)
    }

    pub fn grad_x_p(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let _ = xi;
        let mut out = vec![0.0; x.len()];
        self.grad_x_vr_into(x, &mut out);
        out
    }

    pub fn grad_xi_p(&self, _x: &[f64], xi: &[f64]) -> Vec<f64> {
        self.eval_v(xi)
    }

    /// Hamiltonian vector field (∂_ξp, −∂ₓp) written into `dx`, `dxi`.
    pub fn field_into(&self, x: &[f64], xi: &[f64], dx: &mut [f64], dxi: &mut [f64]) {
        self.v_into(xi, dx);
        self.grad_x_vr_into(x, dxi);
        dxi.iter_mut().for_each(|v| *v = -*v);
    }

    /// {{|x|²,p},p} with the outer bracket by central differences.
    pub fn poisson_double_bracket(&self, x: &[f64], xi: &[f64]) -> f64 {
        let eps3 = f64::EPSILON.cbrt();
        let hx = norm(x).max(1.0) * eps3;
        let hxi = norm(xi).max(1.0) * eps3;
        let inner = |x: &[f64], xi: &[f64]| 2.0 * dot(x, &self.grad_xi_p(x, xi));
        let dxp = self.grad_xi_p(x, xi);
        let dxp_x = self.grad_x_p(x, xi);
        let mut acc = 0.0;
        let mut xp = x.to_vec();
        let mut xip = xi.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + hx;
            let fp = inner(&xp, xi);
            xp[i] = x[i] - hx;
            let fm = inner(&xp, xi);
            xp[i] = x[i];
            acc += (fp - fm) / (2.0 * hx) * dxp[i];
            xip[i] = xi[i] + hxi;
            let gp = inner(x, &xip);
            xip[i] = xi[i] - hxi;
            let gm = inner(x, &xip);
            xip[i] = xi[i];
            acc -= (gp - gm) / (2.0 * hxi) * dxp_x[i];
        }
        acc
    }

    /// Largest radius along direction ω on which p₀(rω) is increasing.
    fn radial_limit(&self, omega: &[f64]) -> f64 {
        match self.p0 {
            P0Family::Cosine => std::f64::consts::PI / omega.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            _ => f64::INFINITY,
        }
    }

    /// Radius r with p₀(rω) = e, on the monotone branch.
    pub fn radial_root(&self, omega: &[f64], e: f64) -> Option<f64> {
        match self.p0 {
            P0Family::Quadratic => (e >= 0.0).then(|| (2.0 * e).sqrt()),
            P0Family::Relativistic => (e >= 1.0).then(|| (e * e - 1.0).sqrt()),
            P0Family::Cosine => {
                let hi = self.radial_limit(omega);
                let f = |r: f64| self.eval_p0(&omega.iter().map(|w| w * r).collect::<Vec<_>>()) - e;
                let mut r = bisect(f, 0.0, hi, 1e-15)?;
                for _ in 0..3 {
                    let xi: Vec<f64> = omega.iter().map(|w| w * r).collect();
                    let g = dot(&self.eval_v(&xi), omega);
                    if g.abs() < 1e-14 {
                        break;
                    }
                    r -= (self.eval_p0(&xi) - e) / g;
                }
                Some(r)
            }
        }
    }

    fn directions(&self) -> Vec<Vec<f64>> {
        let mut seq = ScrambledHalton::new(self.d.max(2) - 1, 7);
        if self.d == 1 {
            return vec![vec![1.0], vec![-1.0]];
        }
        let mut dirs: Vec<Vec<f64>> = (0..DIRECTION_SAMPLES).map(|_| unit_vector(self.d, &seq.next_point())).collect();
        for i in 0..self.d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; self.d];
                e[i] = s;
                dirs.push(e);
            }
        }
        dirs
    }

    /// (min, max) of |v| over Ω⁰_{I_k}, by sampling directions and energies.
    fn speed_range(&self, k: usize) -> Result<(f64, f64), ModelError> {
        let (a, b) = self.nested_interval(k);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for omega in self.directions() {
            for j in 0..=8 {
                let e = a + (b - a) * j as f64 / 8.0;
                let r = self.radial_root(&omega, e).ok_or_else(|| ModelError::EnergyOutOfRange(e, omega.clone()))?;
                let xi: Vec<f64> = omega.iter().map(|w| w * r).collect();
                let s = norm(&self.eval_v(&xi));
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        Ok((lo, hi))
    }

    /// sup |V_R|
    pub fn potential_sup(&self) -> f64 {
        if self.is_free() {
            return 0.0;
        }
        let base = self.coupling.abs() * (1.0 + self.radius * self.radius).powf(-0.5 * self.mu);
        match self.potential {
            Potential::Anisotropic { epsilon } => base * (1.0 + epsilon.abs()),
            _ => base,
        }
    }

    fn compute_momentum_bound(&self) -> f64 {
        let (_, b) = self.nested_interval(6);
        let top = b + self.potential_sup();
        let mut m: f64 = 0.0;
        for omega in self.directions() {
            let lim = self.radial_limit(&omega);
            let r = self.radial_root(&omega, top).unwrap_or(lim);
            m = m.max(r.min(lim));
        }
        m
    }

    /// Quasi-random samples of Ω_{I_k} = {(x,ξ): p(x,ξ) ∈ I_k, |x| ≤ x_max}.
    /// Even-indexed samples are drawn from the cutoff shell R ≤ |x| ≤ 2R.
    pub fn sample_energy_shell(&self, k: usize, n: usize, x_max: f64, seed: u64) -> Vec<PhasePoint> {
        let (a, b) = self.nested_interval(k);
        let dims = 2 + 2 * (self.d.max(2) - 1);
        let mut seq = ScrambledHalton::new(dims, seed);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n && attempts < 50 * n + 100 {
            attempts += 1;
            let u = seq.next_point();
            // the cutoff shell is always sampled, even past x_max
            let r = if out.len() % 2 == 0 { self.radius * (1.0 + u[0]) } else { x_max * u[0] };
            let dx = unit_vector(self.d, &u[2..2 + (self.d.max(2) - 1)]);
            let dxi = unit_vector(self.d, &u[2 + (self.d.max(2) - 1)..]);
            let x: Vec<f64> = dx.iter().map(|v| v * r).collect();
            let e = a + (b - a) * u[1];
            let hi = self.radial_limit(&dxi).min(2.0 * self.momentum_bound + 1.0);
            let f = |s: f64| self.eval_p(&x, &dxi.iter().map(|w| w * s).collect::<Vec<_>>()) - e;
            if let Some(s) = bisect(f, 0.0, hi, 1e-14) {
                out.push(PhasePoint::new(x, dxi.iter().map(|w| w * s).collect()));
            }
        }
        out
    }

    /// Quasi-random momenta on Ω⁰_{I_k} = {ξ: p₀(ξ) ∈ I_k}.
    pub fn sample_momentum_shell(&self, k: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let (a, b) = self.nested_interval(k);
        let mut seq = ScrambledHalton::new(self.d.max(2), seed);
        (0..n)
            .filter_map(|_| {
                let u = seq.next_point();
                let omega = unit_vector(self.d, &u[1..]);
                let e = a + (b - a) * u[0];
                self.radial_root(&omega, e).map(|r| omega.iter().map(|w| w * r).collect())
            })
            .collect()
    }

    /// Minimum of the double bracket over a sample of Ω_{I₅}.
    pub fn bracket_minimum(&self, sample_count: usize, seed: u64) -> f64 {
        self.sample_energy_shell(5, sample_count, 1e3, seed)
            .iter()
            .map(|p| self.poisson_double_bracket(&p.x, &p.xi))
            .fold(f64::INFINITY, f64::min)
    }

    /// Doubles R from the current radius until the sampled minimum of the
    /// double bracket is at least c₄²/2.
    pub fn calibrate_radius(&self, sample_count: usize, seed: u64) -> Result<Calibration, ModelError> {
        let target = 0.5 * self.c4 * self.c4;
        let mut model = self.clone();
        let mut min_bracket = f64::NAN;
        for doublings in 0..=20 {
            min_bracket = model.bracket_minimum(sample_count, seed);
            if min_bracket >= target {
                return Ok(Calibration {
                    radius: model.radius,
                    c4: model.c4,
                    c5: min_bracket,
                    momentum_bound: model.momentum_bound,
                    doublings,
                });
            }
            if doublings < 20 {
                model = model.with_radius(2.0 * model.radius)?;
            }
        }
        Err(ModelError::CalibrationFailed { doublings: 20, radius: model.radius, min_bracket, target })
    }

    /// Model with the calibrated radius and stored c₅.
    pub fn calibrated(&self, sample_count: usize, seed: u64) -> Result<(Self, Calibration), ModelError> {
        let cal = self.calibrate_radius(sample_count, seed)?;
        let mut m = self.with_radius(cal.radius)?;
        m.c5 = Some(cal.c5);
        Ok((m, cal))
    }
}

//! Hamilton flow exp tH_p with variational equations and action integrals.

use nalgebra::DMatrix;

use crate::model::{HamiltonianModel, PhasePoint};
use crate::numerics::{dot, japanese, japanese_t, norm};
use crate::ode::{dp5, Dp5Options, Dp5Solution, OdeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error("energy drift {drift:e} exceeds bound {bound:e}")]
    EnergyDriftExceeded { drift: f64, bound: f64 },
    #[error("direction undefined: x or v(xi) vanishes")]
    DegenerateDirection,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid flow options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_max: f64,
    pub with_jacobian: bool,
    pub with_action: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, t_max: 1e6, with_jacobian: false, with_action: false }
    }
}

impl FlowOptions {
    fn validate(&self, t: f64) -> Result<(), FlowError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(FlowError::Options("tolerances must be positive".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(FlowError::Options("t_max must be positive".into()));
        }
        if t.abs() > self.t_max {
            return Err(FlowError::Options(format!("|t| = {} exceeds t_max = {}", t.abs(), self.t_max)));
        }
        Ok(())
    }

    /// Energy drift allowed relative to the initial energy.
    pub fn drift_bound(&self, energy: f64) -> f64 {
        10.0 * self.rel_tol * energy.abs() + 10.0 * self.abs_tol
    }
}

/// Sampled trajectory. States are stored at accepted integrator steps; any
/// intermediate time is available through [`Trajectory::state_at`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub d: usize,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub jacobians: Option<Vec<DMatrix<f64>>>,
    pub action: Option<Vec<f64>>,
    pub energy_drift: Vec<f64>,
    dense: Dp5Solution,
}

impl Trajectory {
    pub fn end(&self) -> &PhasePoint {
        self.states.last().expect("trajectory is non-empty")
    }

    pub fn end_jacobian(&self) -> Option<&DMatrix<f64>> {
        self.jacobians.as_ref().and_then(|j| j.last())
    }

    pub fn end_action(&self) -> Option<f64> {
        self.action.as_ref().and_then(|a| a.last().copied())
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn state_at(&self, t: f64) -> PhasePoint {
        let y = self.dense.eval(t);
        PhasePoint::new(y[..self.d].to_vec(), y[self.d..2 * self.d].to_vec())
    }
}

/// ∂F/∂z for the Hamiltonian field F = (∂_ξp, −∂ₓp), by central differences.
pub fn field_jacobian(model: &HamiltonianModel, x: &[f64], xi: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let eps3 = f64::EPSILON.cbrt();
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    let mut fp_x = vec![0.0; d];
    let mut fp_xi = vec![0.0; d];
    let mut fm_x = vec![0.0; d];
    let mut fm_xi = vec![0.0; d];
    let mut xp = x.to_vec();
    let hx = norm(x).max(1.0) * eps3;
    for j in 0..d {
        xp[j] = x[j] + hx;
        model.field_into(&xp, xi, &mut fp_x, &mut fp_xi);
        xp[j] = x[j] - hx;
        model.field_into(&xp, xi, &mut fm_x, &mut fm_xi);
        xp[j] = x[j];
        for i in 0..d {
            a[(i, j)] = (fp_x[i] - fm_x[i]) / (2.0 * hx);
            a[(d + i, j)] = (fp_xi[i] - fm_xi[i]) / (2.0 * hx);
        }
    }
    let mut xip = xi.to_vec();
    let hxi = norm(xi).max(1.0) * eps3;
    for j in 0..d {
        xip[j] = xi[j] + hxi;
        model.field_into(x, &xip, &mut fp_x, &mut fp_xi);
        xip[j] = xi[j] - hxi;
        model.field_into(x, &xip, &mut fm_x, &mut fm_xi);
        xip[j] = xi[j];
        for i in 0..d {
            a[(i, d + j)] = (fp_x[i] - fm_x[i]) / (2.0 * hxi);
            a[(d + i, d + j)] = (fp_xi[i] - fm_xi[i]) / (2.0 * hxi);
        }
    }
    a
}

/// Right-hand side of the augmented Hamilton system.
///
/// Layout: x, ξ, then (if `cols > 0`) a 2d×cols variational block stored
/// column-major, then (if `action`) the integrand p − x·∂ₓp.
pub(crate) fn augmented_rhs(model: &HamiltonianModel, cols: usize, action: bool, y: &[f64], dy: &mut [f64]) {
    let d = model.dim();
    let (z, rest) = y.split_at(2 * d);
    let (x, xi) = z.split_at(d);
    {
        let (dx, dxi) = dy[..2 * d].split_at_mut(d);
        model.field_into(x, xi, dx, dxi);
    }
    if cols > 0 {
        let a = field_jacobian(model, x, xi);
        let n = 2 * d;
        for c in 0..cols {
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[(i, k)] * rest[c * n + k];
                }
                dy[n + c * n + i] = s;
            }
        }
    }
    if action {
        let idx = 2 * d + 2 * d * cols;
        let gx: Vec<f64> = dy[d..2 * d].iter().map(|v| -v).collect();
        dy[idx] = model.eval_p(x, xi) - dot(x, &gx);
    }
}

/// Integrates the Hamilton equations from `p0` over signed time `t`.
pub fn integrate_flow(model: &HamiltonianModel, p0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<Trajectory, FlowError> {
    opts.validate(t)?;
    if !p0.is_finite() || !model.eval_p(&p0.x, &p0.xi).is_finite() {
        return Err(FlowError::Precondition("initial data must be finite".into()));
    }
    let d = model.dim();
    let n = 2 * d;
    let cols = if opts.with_jacobian { n } else { 0 };
    let mut y0 = p0.x.clone();
    y0.extend_from_slice(&p0.xi);
    if cols > 0 {
        for c in 0..n {
            for i in 0..n {
                y0.push(if i == c { 1.0 } else { 0.0 });
            }
        }
    }
    if opts.with_action {
        y0.push(0.0);
    }
    let ode = Dp5Options { abs_tol: opts.abs_tol, rel_tol: opts.rel_tol, ..Dp5Options::default() };
    let sol = dp5(|_, y, dy| augmented_rhs(model, cols, opts.with_action, y, dy), 0.0, &y0, t, &ode)?;

    let e0 = model.eval_p(&p0.x, &p0.xi);
    let bound = opts.drift_bound(e0);
    let mut states = Vec::with_capacity(sol.y.len());
    let mut drift = Vec::with_capacity(sol.y.len());
    let mut jacs = cols.gt(&0).then(Vec::new);
    let mut action = opts.with_action.then(Vec::new);
    for y in &sol.y {
        let p = PhasePoint::new(y[..d].to_vec(), y[d..n].to_vec());
        let e = (model.eval_p(&p.x, &p.xi) - e0).abs();
        drift.push(e);
        states.push(p);
        if let Some(j) = jacs.as_mut() {
            j.push(DMatrix::from_column_slice(n, n, &y[n..n + n * n]));
        }
        if let Some(a) = action.as_mut() {
            a.push(y[n + n * cols]);
        }
    }
    let max_drift = drift.iter().fold(0.0f64, |m, v| m.max(*v));
    if max_drift > bound {
        return Err(FlowError::EnergyDriftExceeded { drift: max_drift, bound });
    }
    Ok(Trajectory { d, times: sol.t.clone(), states, jacobians: jacs, action, energy_drift: drift, dense: sol })
}

/// Full Jacobian ∂(x,ξ)/∂(x₀,ξ₀) at time t.
pub fn flow_jacobian(model: &HamiltonianModel, p0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<DMatrix<f64>, FlowError> {
    let opts = FlowOptions { with_jacobian: true, ..opts.clone() };
    let traj = integrate_flow(model, p0, t, &opts)?;
    Ok(traj.end_jacobian().expect("jacobian requested").clone())
}

/// Standard symplectic form Ω = [[0, E], [−E, 0]].
pub fn symplectic_form(d: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        o[(i, d + i)] = 1.0;
        o[(d + i, i)] = -1.0;
    }
    o
}

/// max |JᵀΩJ − Ω|
pub fn symplectic_defect(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows() / 2;
    let o = symplectic_form(d);
    (j.transpose() * &o * j - o).amax()
}

/// cos(x, v(ξ))
pub fn cos_angle(model: &HamiltonianModel, p: &PhasePoint) -> Result<f64, FlowError> {
    let v = model.eval_v(&p.xi);
    let nx = norm(&p.x);
    let nv = norm(&v);
    if nx == 0.0 || nv == 0.0 {
        return Err(FlowError::DegenerateDirection);
    }
    Ok((dot(&p.x, &v) / (nx * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Out-going (sign +) or in-coming (sign −) condition ±cos(x, v(ξ)) ≥ β.
pub fn satisfies_direction(model: &HamiltonianModel, p: &PhasePoint, sign: Sign, beta: f64) -> Result<bool, FlowError> {
    Ok(sign.value() * cos_angle(model, p)? >= beta)
}

/// Integrates to ±t_max and returns (least-squares c in |x(t)| ≈ c(⟨x₀⟩+⟨t⟩),
/// min |x(t)|/(⟨x₀⟩+⟨t⟩)).
pub fn min_radius_estimate(model: &HamiltonianModel, p0: &PhasePoint, sign: Sign, t_max: f64, beta: f64) -> Result<(f64, f64), FlowError> {
    if !satisfies_direction(model, p0, sign, beta)? {
        return Err(FlowError::Precondition(format!(
            "{sign}cos(x0, v(xi0)) = {:.6} is below beta = {beta}",
            sign.value() * cos_angle(model, p0)?
        )));
    }
    let opts = FlowOptions { t_max, ..FlowOptions::default() };
    let traj = integrate_flow(model, p0, sign.value() * t_max, &opts)?;
    let jx0 = japanese(&p0.x);
    let mut times: Vec<f64> = traj.times.clone();
    times.extend((0..=200).map(|k| sign.value() * t_max * (k as f64 / 200.0).powi(3)));
    let (mut num, mut den, mut min_ratio) = (0.0, 0.0, f64::INFINITY);
    for t in times {
        let r = norm(&traj.state_at(t).x);
        let s = jx0 + japanese_t(&[], t);
        num += r * s;
        den += s * s;
        min_ratio = min_ratio.min(r / s);
    }
    Ok((num / den, min_ratio))
}

//! Interaction-picture dynamics, classical wave maps w± and their inverses, and
//! the generating functions ψ(t,x,ξ) and ψ±(x,ξ).

use std::cell::RefCell;

use nalgebra::DMatrix;

use crate::flow::Sign;
use crate::hj::{HjError, HjPoint, HjSolver};
use crate::model::HamiltonianModel;
use crate::numerics::{dot, japanese, mat_vec, norm, solve, sub};
use crate::ode::{dp5, Dp5Options, OdeError};
use crate::propagate::{PropState, Propagator, Trapped, Variational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveMapError {
    #[error(transparent)]
    Hj(#[from] HjError),
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error(transparent)]
    Trapped(#[from] Trapped),
    #[error("limit t -> {sign}inf did not converge: tail bound {tail:e} stagnates at t = {t}")]
    LimitNotConverged { sign: Sign, tail: f64, t: f64 },
    #[error("fixed-point inversion diverged (last step {step:e} after {iterations} iterations)")]
    FixedPointDiverged { step: f64, iterations: usize },
    #[error("Newton inversion of the momentum map diverged (residual {residual:e} after {iterations} iterations)")]
    NewtonDiverged { residual: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveMapOptions {
    /// Stop once the analytic tail bound drops below this.
    pub tail_tol: f64,
    /// Hard horizon cap.
    pub cap: f64,
    /// Smallest checkpoint of the doubling ladder.
    pub t_floor: f64,
    /// Horizon pair (T/2, T) used by the ψ evaluators; T defaults to `cap`.
    pub phase_horizon: Option<f64>,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for WaveMapOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-9,
            cap: 1e6,
            t_floor: 1.0,
            phase_horizon: None,
            fixed_point_tol: 1e-11,
            fixed_point_max_iter: 100,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionState {
    pub t: f64,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    /// x₀·ξ₀ + ∫₀ᵗ (q − y·∂_y q) ds
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveMapResult {
    pub x_pm: Vec<f64>,
    pub xi_pm: Vec<f64>,
    pub sign: Sign,
    /// Limit of the interaction action, ψ±(x₀, ξ±).
    pub action: f64,
    pub t_stop: f64,
    /// Analytic tail bound C⟨T⟩^{−μ}/μ at the stopping horizon.
    pub tail_bound: f64,
    /// Size of the Richardson correction applied at the stopping horizon.
    pub extrapolation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseWaveMap {
    pub x: Vec<f64>,
    pub xi0: Vec<f64>,
    pub iterations: usize,
    /// |η_{k+1} − η_k| per iteration.
    pub steps: Vec<f64>,
}

impl InverseWaveMap {
    /// Largest observed ratio of successive fixed-point steps.
    pub fn contraction(&self) -> f64 {
        self.steps.windows(2).filter(|w| w[0] > 1e-13).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }
}

/// Value and gradients of a generating function at (x, ξ).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseData {
    pub value: f64,
    /// ∂ₓψ: the initial momentum mapped to ξ.
    pub grad_x: Vec<f64>,
    /// ∂_ξψ: the interaction-picture position at the horizon (or its limit).
    pub grad_xi: Vec<f64>,
}

/// Second derivatives of a generating function at (x, ξ).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHessian {
    /// ∂ₓ∂ₓψ
    pub xx: DMatrix<f64>,
    /// ∂ₓ∂_ξψ, rows x, columns ξ.
    pub x_xi: DMatrix<f64>,
    /// ∂_ξ∂_ξψ
    pub xi_xi: DMatrix<f64>,
}

impl PhaseHessian {
    fn free(d: usize) -> Self {
        Self { xx: DMatrix::zeros(d, d), x_xi: DMatrix::identity(d, d), xi_xi: DMatrix::zeros(d, d) }
    }

    fn richardson(mu: f64, a: &Self, b: &Self) -> Self {
        let r = 2f64.powf(mu);
        let mix = |c: &DMatrix<f64>, f: &DMatrix<f64>| (f * r - c) / (r - 1.0);
        Self { xx: mix(&a.xx, &b.xx), x_xi: mix(&a.x_xi, &b.x_xi), xi_xi: mix(&a.xi_xi, &b.xi_xi) }
    }
}

/// Shared evaluator for the interaction picture.
#[derive(Debug)]
pub struct WaveMaps {
    model: HamiltonianModel,
    hj: HjSolver,
    pub opts: WaveMapOptions,
}

fn richardson(mu: f64, coarse: f64, fine: f64) -> f64 {
    let r = 2f64.powf(mu);
    (r * fine - coarse) / (r - 1.0)
}

fn richardson_vec(mu: f64, coarse: &[f64], fine: &[f64]) -> Vec<f64> {
    coarse.iter().zip(fine).map(|(c, f)| richardson(mu, *c, *f)).collect()
}

impl WaveMaps {
    pub fn new(model: &HamiltonianModel) -> Self {
        Self::with_options(model, WaveMapOptions::default())
    }

    pub fn with_options(model: &HamiltonianModel, opts: WaveMapOptions) -> Self {
        Self::with_propagator(Propagator::new(model), opts)
    }

    pub fn with_propagator(prop: Propagator, opts: WaveMapOptions) -> Self {
        Self { model: prop.model().clone(), hj: HjSolver::with_propagator(prop), opts }
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn hj(&self) -> &HjSolver {
        &self.hj
    }

    fn prop(&self) -> &Propagator {
        self.hj.propagator()
    }

    /// Horizon pair (T/2, T) of the ψ evaluators.
    pub fn phase_horizons(&self) -> (f64, f64) {
        let t = self.opts.phase_horizon.unwrap_or(self.opts.cap);
        (0.5 * t, t)
    }

    fn interaction_from(&self, x0: &[f64], xi0: &[f64], s: &PropState, hp: &HjPoint) -> InteractionState {
        let t = s.t;
        let g = hp.grad();
        let h = hp.hessian();
        let dxi = sub(&s.xi, &hp.xi);
        let hd = mat_vec(&h, &dxi);
        let y: Vec<f64> = (0..x0.len()).map(|i| s.x[i] - g[i] - hd[i]).collect();
        let v = self.model.eval_v(&hp.xi);
        let lever: Vec<f64> = s.x.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        let action =
            dot(x0, xi0) + t * self.model.eval_vr(&s.x, &s.xi) - s.k - hp.phi_remainder(&self.model) + dot(&lever, &sub(&hp.xi, &s.xi));
        InteractionState { t, y, xi: s.xi.clone(), action }
    }

    /// (y(t), ξ(t)) by subtraction y = x(t) − ∂_ξφ(t, ξ(t)).
    pub fn interaction_flow(&self, x0: &[f64], xi0: &[f64], t: f64) -> Result<InteractionState, WaveMapError> {
        let s = self.prop().propagate(x0, xi0, t, Variational::None)?;
        let hp = self.hj.solve_uncached(t, &s.xi, &s.xi)?;
        Ok(self.interaction_from(x0, xi0, &s, &hp))
    }

    /// (y(t), ξ(t)) by integrating the Hamilton equations of
    /// q(t,y,ξ) = p(y+∂_ξφ(t,ξ),ξ) − p(∂_ξφ(t,ξ),ξ) directly.
    pub fn interaction_flow_q(&self, x0: &[f64], xi0: &[f64], t: f64, rel_tol: f64) -> Result<InteractionState, WaveMapError> {
        let d = x0.len();
        let m = &self.model;
        let guess = RefCell::new(xi0.to_vec());
        let failure: RefCell<Option<HjError>> = RefCell::new(None);
        let rhs = |s: f64, z: &[f64], dz: &mut [f64]| {
            let (y, xi) = (&z[..d], &z[d..2 * d]);
            let (xx, h) = if s == 0.0 {
                (vec![0.0; d], DMatrix::zeros(d, d))
            } else {
                let g = guess.borrow().clone();
                match self.hj.solve_uncached(s, xi, &g) {
                    Ok(hp) => {
                        *guess.borrow_mut() = hp.eta.clone();
                        (hp.grad(), hp.hessian())
                    }
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        dz.iter_mut().for_each(|v| *v = f64::NAN);
                        return;
                    }
                }
            };
            let x: Vec<f64> = y.iter().zip(&xx).map(|(a, b)| a + b).collect();
            let gx = m.grad_x_p(&x, xi);
            let gx0 = m.grad_x_p(&xx, xi);
            let vx = m.grad_xi_p(&x, xi);
            let vx0 = m.grad_xi_p(&xx, xi);
            let dg: Vec<f64> = gx.iter().zip(&gx0).map(|(a, b)| a - b).collect();
            let hdg = mat_vec(&h, &dg);
            for i in 0..d {
                dz[i] = vx[i] - vx0[i] + hdg[i];
                dz[d + i] = -gx[i];
            }
            let q = m.eval_p(&x, xi) - m.eval_p(&xx, xi);
            dz[2 * d] = q - dot(y, &gx);
        };
        let mut z0: Vec<f64> = x0.to_vec();
        z0.extend_from_slice(xi0);
        z0.push(dot(x0, xi0));
        let opts = Dp5Options { rel_tol, abs_tol: rel_tol, ..Dp5Options::default() };
        let sol = dp5(rhs, 0.0, &z0, t, &opts);
        if let Some(e) = failure.into_inner() {
            return Err(e.into());
        }
        let sol = sol?;
        let z = sol.final_state();
        Ok(InteractionState { t, y: z[..d].to_vec(), xi: z[d..2 * d].to_vec(), action: z[2 * d] })
    }

    fn ladder(&self) -> Vec<f64> {
        let mut ts = vec![self.opts.cap];
        while ts.last().copied().unwrap_or(0.0) * 0.5 >= self.opts.t_floor {
            let next = ts.last().copied().unwrap_or(0.0) * 0.5;
            ts.push(next);
        }
        ts.reverse();
        ts
    }

    /// Analytic tail bound C⟨T⟩^{−μ}/μ with C = |ξ̇(T)|⟨T⟩^{1+μ}(1+|x₀|).
    fn tail_bound(&self, x0: &[f64], s: &PropState) -> f64 {
        let mu = self.model.mu();
        let jt = (1.0 + s.t * s.t).sqrt();
        let force = norm(&self.model.grad_x_p(&s.x, &s.xi));
        force * jt * (1.0 + norm(x0)) / mu
    }

    fn departed(&self, s: &PropState, sign: Sign) -> bool {
        norm(&s.x) >= 2.0 * self.model.radius() && sign.value() * dot(&s.x, &self.model.eval_v(&s.xi)) > 0.0
    }

    /// Runs the doubling ladder and returns the states at (T/2, T), the tail
    /// bound at T, and T.
    fn limit_states(&self, x0: &[f64], xi0: &[f64], sign: Sign) -> Result<(PropState, PropState, f64), WaveMapError> {
        let ladder = self.ladder();
        let mut state = self.prop().initial(x0, xi0, Variational::None);
        let mut prev: Option<PropState> = None;
        let mut prev_tail = f64::INFINITY;
        for (k, &t) in ladder.iter().enumerate() {
            let next = self.prop().run(&state, &[sign.value() * t])?.pop().expect("one checkpoint");
            let tail = self.tail_bound(x0, &next);
            if let Some(p) = prev.take() {
                let done = self.model.is_free() || (tail < self.opts.tail_tol && self.departed(&next, sign));
                if done {
                    return Ok((p, next, tail));
                }
                if k + 1 == ladder.len() {
                    if tail >= prev_tail {
                        return Err(WaveMapError::LimitNotConverged { sign, tail, t });
                    }
                    return Ok((p, next, tail));
                }
            }
            prev_tail = tail;
            prev = Some(next.clone());
            state = next;
        }
        unreachable!("ladder has at least two checkpoints")
    }

    /// w±(x₀,ξ₀) = (x±, ξ±).
    pub fn wave_map(&self, x0: &[f64], xi0: &[f64], sign: Sign) -> Result<WaveMapResult, WaveMapError> {
        if self.model.is_free() {
            return Ok(WaveMapResult {
                x_pm: x0.to_vec(),
                xi_pm: xi0.to_vec(),
                sign,
                action: dot(x0, xi0),
                t_stop: 0.0,
                tail_bound: 0.0,
                extrapolation: 0.0,
            });
        }
        let (a, b, tail) = self.limit_states(x0, xi0, sign)?;
        let ha = self.hj.solve_uncached(a.t, &a.xi, &a.xi)?;
        let hb = self.hj.solve_uncached(b.t, &b.xi, &ha.eta)?;
        let ia = self.interaction_from(x0, xi0, &a, &ha);
        let ib = self.interaction_from(x0, xi0, &b, &hb);
        let mu = self.model.mu();
        let x_pm = richardson_vec(mu, &ia.y, &ib.y);
        let xi_pm = richardson_vec(mu, &ia.xi, &ib.xi);
        let action = richardson(mu, ia.action, ib.action);
        let extrapolation = norm(&sub(&x_pm, &ib.y)).max(norm(&sub(&xi_pm, &ib.xi)));
        Ok(WaveMapResult { x_pm, xi_pm, sign, action, t_stop: b.t.abs(), tail_bound: tail, extrapolation })
    }

    /// (x, ξ) ↦ (x, ξ₀) with ξ±(x, ξ₀) = ξ, by the fixed point F(η) = ξ − (ξ±(x,η) − η).
    pub fn inverse_wave_map(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<InverseWaveMap, WaveMapError> {
        let mut eta = xi.to_vec();
        let mut steps = Vec::new();
        for it in 1..=self.opts.fixed_point_max_iter {
            let w = self.wave_map(x, &eta, sign)?;
            let next: Vec<f64> = (0..xi.len()).map(|i| xi[i] - (w.xi_pm[i] - eta[i])).collect();
            let step = norm(&sub(&next, &eta));
            eta = next;
            steps.push(step);
            if step < self.opts.fixed_point_tol {
                return Ok(InverseWaveMap { x: x.to_vec(), xi0: eta, iterations: it, steps });
            }
            let n = steps.len();
            if !step.is_finite() || (n >= 4 && steps[n - 1] > steps[n - 2] && steps[n - 2] > steps[n - 3]) {
                return Err(WaveMapError::FixedPointDiverged { step, iterations: it });
            }
        }
        Err(WaveMapError::FixedPointDiverged {
            step: steps.last().copied().unwrap_or(f64::NAN),
            iterations: self.opts.fixed_point_max_iter,
        })
    }

    /// Newton solve of ξ(t; x, ξ₀) = ξ for ξ₀; returns ξ₀ and the state at t.
    fn invert_momentum(&self, t: f64, x: &[f64], xi: &[f64], guess: &[f64]) -> Result<(Vec<f64>, PropState), WaveMapError> {
        let mut xi0 = guess.to_vec();
        let prop = self.prop();
        let mut s = prop.propagate(x, &xi0, t, Variational::Full)?;
        let mut res = norm(&sub(&s.xi, xi));
        let mut it = 0;
        while res >= self.opts.newton_tol * (1.0 + norm(xi)) {
            if it >= self.opts.newton_max_iter || !res.is_finite() {
                return Err(WaveMapError::NewtonDiverged { residual: res, iterations: it });
            }
            it += 1;
            let step = solve(&momentum_block(&s), &sub(&s.xi, xi)).ok_or(WaveMapError::NewtonDiverged { residual: res, iterations: it })?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = xi0.iter().zip(&step).map(|(a, b)| a - lambda * b).collect();
                let st = prop.propagate(x, &trial, t, Variational::Full)?;
                let r = norm(&sub(&st.xi, xi));
                if r < res || lambda < 1e-3 {
                    xi0 = trial;
                    s = st;
                    res = r;
                    break;
                }
                lambda *= 0.5;
            }
        }
        Ok((xi0, s))
    }

    /// ψ(t,x,ξ) with its gradients, plus the raw initial momentum (for warm
    /// starts) and the full variational matrix at t.
    pub fn psi_t_full(
        &self,
        t: f64,
        x: &[f64],
        xi: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(PhaseData, Vec<f64>, Option<PropState>), WaveMapError> {
        if t == 0.0 || self.model.is_free() {
            let data = PhaseData { value: dot(x, xi), grad_x: xi.to_vec(), grad_xi: x.to_vec() };
            return Ok((data, xi.to_vec(), None));
        }
        let (xi0, s) = self.invert_momentum(t, x, xi, guess.unwrap_or(xi))?;
        let hp = self.hj.point(t, xi)?;
        let r = sub(xi, &s.xi);
        let delta = solve(&momentum_block(&s), &r).unwrap_or_else(|| vec![0.0; xi.len()]);
        let dx_dxi0 = s.jac.view((0, xi.len()), (xi.len(), xi.len())).into_owned();
        let x_corr: Vec<f64> = s.x.iter().zip(mat_vec(&dx_dxi0, &delta)).map(|(a, b)| a + b).collect();
        let grad_x: Vec<f64> = xi0.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let g = hp.grad();
        let grad_xi: Vec<f64> = x_corr.iter().zip(&g).map(|(a, b)| a - b).collect();
        let v = self.model.eval_v(xi);
        let lever: Vec<f64> = s.x.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        let value = dot(x, &xi0) + t * self.model.eval_vr(&s.x, &s.xi) - s.k - hp.phi_remainder(&self.model) + dot(&lever, &r);
        Ok((PhaseData { value, grad_x, grad_xi }, xi0, Some(s)))
    }

    /// ψ(t,x,ξ) = φ(t, x, (L_t^x)⁻¹(ξ)) with analytic gradients.
    pub fn psi_t_data(&self, t: f64, x: &[f64], xi: &[f64]) -> Result<PhaseData, WaveMapError> {
        Ok(self.psi_t_full(t, x, xi, None)?.0)
    }

    pub fn psi_t(&self, t: f64, x: &[f64], xi: &[f64]) -> Result<f64, WaveMapError> {
        Ok(self.psi_t_data(t, x, xi)?.value)
    }

    /// ψ±(x,ξ) with gradients, Richardson-extrapolated over the horizon pair.
    pub fn phase(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<PhaseData, WaveMapError> {
        self.phase_with_guess(x, xi, sign, None)
    }

    pub fn phase_with_guess(&self, x: &[f64], xi: &[f64], sign: Sign, guess: Option<&[f64]>) -> Result<PhaseData, WaveMapError> {
        if self.model.is_free() {
            return Ok(PhaseData { value: dot(x, xi), grad_x: xi.to_vec(), grad_xi: x.to_vec() });
        }
        let (t1, t2) = self.phase_horizons();
        let (a, g1, _) = self.psi_t_full(sign.value() * t1, x, xi, guess)?;
        let (b, _, _) = self.psi_t_full(sign.value() * t2, x, xi, Some(&g1))?;
        let mu = self.model.mu();
        Ok(PhaseData {
            value: richardson(mu, a.value, b.value),
            grad_x: richardson_vec(mu, &a.grad_x, &b.grad_x),
            grad_xi: richardson_vec(mu, &a.grad_xi, &b.grad_xi),
        })
    }

    /// ψ(t,x,ξ) with gradients and second derivatives from the variational matrix.
    pub fn psi_t_second(
        &self,
        t: f64,
        x: &[f64],
        xi: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(PhaseData, PhaseHessian, Vec<f64>), WaveMapError> {
        let d = x.len();
        let (data, xi0, state) = self.psi_t_full(t, x, xi, guess)?;
        let Some(s) = state else {
            return Ok((data, PhaseHessian::free(d), xi0));
        };
        let hp = self.hj.point(t, xi)?;
        let pp_inv = momentum_block(&s).try_inverse().ok_or(WaveMapError::NewtonDiverged { residual: f64::NAN, iterations: 0 })?;
        let px = s.jac.view((d, 0), (d, d)).into_owned();
        let xp = s.jac.view((0, d), (d, d)).into_owned();
        let xx = -(&pp_inv * px);
        let xi_xi = &xp * &pp_inv - hp.hessian();
        Ok((data, PhaseHessian { xx, x_xi: pp_inv, xi_xi }, xi0))
    }

    /// ψ± with gradients and second derivatives, Richardson-extrapolated.
    pub fn phase_second(
        &self,
        x: &[f64],
        xi: &[f64],
        sign: Sign,
        guess: Option<&[f64]>,
    ) -> Result<(PhaseData, PhaseHessian), WaveMapError> {
        let d = x.len();
        if self.model.is_free() {
            let data = PhaseData { value: dot(x, xi), grad_x: xi.to_vec(), grad_xi: x.to_vec() };
            return Ok((data, PhaseHessian::free(d)));
        }
        let (t1, t2) = self.phase_horizons();
        let (a, ha, g1) = self.psi_t_second(sign.value() * t1, x, xi, guess)?;
        let (b, hb, _) = self.psi_t_second(sign.value() * t2, x, xi, Some(&g1))?;
        let mu = self.model.mu();
        let data = PhaseData {
            value: richardson(mu, a.value, b.value),
            grad_x: richardson_vec(mu, &a.grad_x, &b.grad_x),
            grad_xi: richardson_vec(mu, &a.grad_xi, &b.grad_xi),
        };
        Ok((data, PhaseHessian::richardson(mu, &ha, &hb)))
    }

    pub fn psi_pm(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<f64, WaveMapError> {
        Ok(self.phase(x, xi, sign)?.value)
    }

    pub fn eikonal(&self, sign: Sign) -> EikonalPhase<'_> {
        EikonalPhase { wm: self, sign }
    }
}

/// ∂ξ(t)/∂ξ₀ from a full variational matrix.
fn momentum_block(s: &PropState) -> DMatrix<f64> {
    let d = s.x.len();
    s.jac.view((d, d), (d, d)).into_owned()
}

/// Finite-difference step for ψ derivatives: 1e−5·max(1, |v|).
pub fn phase_step(v: &[f64]) -> f64 {
    1e-5 * norm(v).max(1.0)
}

/// Evaluator handle for ψ₊ or ψ₋.
#[derive(Debug, Clone, Copy)]
pub struct EikonalPhase<'a> {
    pub wm: &'a WaveMaps,
    pub sign: Sign,
}

impl EikonalPhase<'_> {
    pub fn data(&self, x: &[f64], xi: &[f64]) -> Result<PhaseData, WaveMapError> {
        self.wm.phase(x, xi, self.sign)
    }

    pub fn value(&self, x: &[f64], xi: &[f64]) -> Result<f64, WaveMapError> {
        Ok(self.data(x, xi)?.value)
    }

    /// Central FD of ψ± in x.
    pub fn grad_x_fd(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>, WaveMapError> {
        let h = phase_step(x);
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let a = self.value(&xp, xi)?;
            xp[i] = x[i] - h;
            let b = self.value(&xp, xi)?;
            xp[i] = x[i];
            g[i] = (a - b) / (2.0 * h);
        }
        Ok(g)
    }

    /// Central FD of ψ± in ξ.
    pub fn grad_xi_fd(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>, WaveMapError> {
        let h = phase_step(xi);
        let mut g = vec![0.0; xi.len()];
        let mut p = xi.to_vec();
        for i in 0..xi.len() {
            p[i] = xi[i] + h;
            let a = self.value(x, &p)?;
            p[i] = xi[i] - h;
            let b = self.value(x, &p)?;
            p[i] = xi[i];
            g[i] = (a - b) / (2.0 * h);
        }
        Ok(g)
    }

    /// ∂ₓ∂_ξψ± (rows x, columns ξ) by central FD in ξ of the analytic ∂ₓψ±.
    pub fn mixed_hessian(&self, x: &[f64], xi: &[f64]) -> Result<DMatrix<f64>, WaveMapError> {
        let d = x.len();
        let h = phase_step(xi);
        let mut m = DMatrix::zeros(d, d);
        let mut p = xi.to_vec();
        for j in 0..d {
            p[j] = xi[j] + h;
            let a = self.data(x, &p)?.grad_x;
            p[j] = xi[j] - h;
            let b = self.data(x, &p)?.grad_x;
            p[j] = xi[j];
            for i in 0..d {
                m[(i, j)] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }
}

/// ⟨x⟩ re-export for callers fitting decay against ⟨x₀⟩.
pub fn bracket(x: &[f64]) -> f64 {
    japanese(x)
}

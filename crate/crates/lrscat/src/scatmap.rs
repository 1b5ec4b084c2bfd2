//! Stationary points of −ψ₊(x,ξ) + ψ₋(x,η) − y·η, the scattering-map
//! generating function ψ(y,ξ), its volume factor Θ(y,ξ), and the Hessian and
//! flow-direction identities.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::flow::Sign;
use crate::model::HamiltonianModel;
use crate::numerics::{det, dot, norm, solve, sub};
use crate::propagate::Variational;
use crate::wavemaps::{PhaseData, PhaseHessian, WaveMapError, WaveMaps};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScatmapError {
    #[error(transparent)]
    WaveMap(#[from] WaveMapError),
    #[error("stationary-point Newton diverged at y = {y:?}, xi = {xi:?} (residual {residual:e} after {iterations} iterations)")]
    NewtonDiverged { y: Vec<f64>, xi: Vec<f64>, residual: f64, iterations: usize, path: Vec<(Vec<f64>, Vec<f64>)> },
    #[error("mixed Hessian is singular (|det| = {det:e})")]
    SingularHessian { det: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatmapOptions {
    /// Newton target on the stationary residuals.
    pub tol: f64,
    /// Largest residual accepted when Newton stagnates.
    pub accept: f64,
    pub max_iter: usize,
    /// Relative first-level FD step for Hessian blocks.
    pub hessian_step: f64,
    /// Relative FD step for gradients of ψ(y,ξ).
    pub gradient_step: f64,
    /// Steps of the coupling homotopy used when Newton fails from (y, ξ).
    pub homotopy_steps: usize,
}

impl Default for ScatmapOptions {
    fn default() -> Self {
        Self { tol: 1e-11, accept: 1e-8, max_iter: 30, hessian_step: 1e-4, gradient_step: 1e-5, homotopy_steps: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPoint {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    /// ∂ₓψ₋(x,η) = ∂ₓψ₊(x,ξ)
    pub zeta: Vec<f64>,
    /// |∂ₓψ₊(x,ξ) − ∂ₓψ₋(x,η)|
    pub residual_x: f64,
    /// |∂_ηψ₋(x,η) − y|
    pub residual_y: f64,
    pub iterations: usize,
    pub plus: PhaseData,
    pub minus: PhaseData,
    pub plus_hessian: PhaseHessian,
    pub minus_hessian: PhaseHessian,
}

impl StationaryPoint {
    pub fn residual(&self) -> f64 {
        self.residual_x.max(self.residual_y)
    }

    /// ψ(y,ξ) = ψ₊(x,ξ) − ψ₋(x,η) + y·η
    pub fn psi(&self) -> f64 {
        self.plus.value - self.minus.value + dot(&self.y, &self.eta)
    }

    /// ∂_ξψ(y,ξ) = ∂_ξψ₊(x,ξ)
    pub fn grad_xi(&self) -> &[f64] {
        &self.plus.grad_xi
    }
}

/// ψ-derived scattering map against the composed wave maps at one (y,ξ).
#[derive(Debug, Clone, PartialEq)]
pub struct MapCheck {
    /// FD ∂_ξψ(y,ξ).
    pub grad_xi_fd: Vec<f64>,
    /// Position and momentum of w₊ ∘ w₋⁻¹ (y, η).
    pub composed_x: Vec<f64>,
    pub composed_xi: Vec<f64>,
    /// |w₋(x, ζ₀) − (y, η)|: how well ζ₀ inverts w₋ at (y, η).
    pub inverse_defect: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

type Key = Vec<u64>;

/// Evaluator for ψ(y,ξ) with a cache of stationary points keyed on the exact
/// bits of (y, ξ).
#[derive(Debug)]
pub struct ScatteringPhase {
    wm: WaveMaps,
    pub opts: ScatmapOptions,
    cache: RwLock<HashMap<Key, Arc<StationaryPoint>>>,
}

struct Eval {
    plus: PhaseData,
    minus: PhaseData,
    hp: PhaseHessian,
    hm: PhaseHessian,
    f: Vec<f64>,
    res: f64,
}

fn central_fd<F>(mut f: F, at: &[f64], h: f64) -> Result<DMatrix<f64>, ScatmapError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, ScatmapError>,
{
    let n = at.len();
    let mut cols = Vec::with_capacity(n);
    let mut p = at.to_vec();
    for j in 0..n {
        p[j] = at[j] + h;
        let a = f(&p)?;
        p[j] = at[j] - h;
        let b = f(&p)?;
        p[j] = at[j];
        cols.push(a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect::<Vec<_>>());
    }
    let m = cols[0].len();
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Two-level central FD of a vector function, Richardson-combined:
/// (4·D(h/2) − D(h))/3. Column j is ∂f/∂z_j.
pub fn richardson_fd<F>(mut f: F, at: &[f64], h: f64) -> Result<DMatrix<f64>, ScatmapError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, ScatmapError>,
{
    let coarse = central_fd(&mut f, at, h)?;
    let fine = central_fd(&mut f, at, 0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

fn theta_of(m: &DMatrix<f64>) -> Result<f64, ScatmapError> {
    let dt = det(m);
    if dt.abs() < 1e-12 {
        return Err(ScatmapError::SingularHessian { det: dt });
    }
    Ok(dt.abs().sqrt())
}

/// Jacobian of (∂ₓψ₊ − ∂ₓψ₋, ∂_ηψ₋ − y) in (x, η).
fn stationary_jacobian(hp: &PhaseHessian, hm: &PhaseHessian) -> DMatrix<f64> {
    let d = hp.xx.nrows();
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for c in 0..d {
            j[(r, c)] = hp.xx[(r, c)] - hm.xx[(r, c)];
            j[(r, d + c)] = -hm.x_xi[(r, c)];
            j[(d + r, c)] = hm.x_xi[(c, r)];
            j[(d + r, d + c)] = hm.xi_xi[(r, c)];
        }
    }
    j
}

impl ScatteringPhase {
    pub fn new(model: &HamiltonianModel) -> Self {
        Self::with_wave_maps(WaveMaps::new(model), ScatmapOptions::default())
    }

    pub fn with_wave_maps(wm: WaveMaps, opts: ScatmapOptions) -> Self {
        Self { wm, opts, cache: RwLock::new(HashMap::new()) }
    }

    pub fn model(&self) -> &HamiltonianModel {
        self.wm.model()
    }

    pub fn wave_maps(&self) -> &WaveMaps {
        &self.wm
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn evaluate(&self, y: &[f64], xi: &[f64], x: &[f64], eta: &[f64], zeta: &[f64]) -> Result<Eval, ScatmapError> {
        let (plus, hp) = self.wm.phase_second(x, xi, Sign::Plus, Some(zeta))?;
        let (minus, hm) = self.wm.phase_second(x, eta, Sign::Minus, Some(zeta))?;
        let d = y.len();
        let mut f = vec![0.0; 2 * d];
        for i in 0..d {
            f[i] = plus.grad_x[i] - minus.grad_x[i];
            f[d + i] = minus.grad_xi[i] - y[i];
        }
        let res = norm(&f[..d]).max(norm(&f[d..]));
        Ok(Eval { plus, minus, hp, hm, f, res })
    }

    fn newton(&self, y: &[f64], xi: &[f64], x0: &[f64], eta0: &[f64], zeta0: &[f64]) -> Result<StationaryPoint, ScatmapError> {
        let d = y.len();
        let mut x = x0.to_vec();
        let mut eta = eta0.to_vec();
        let mut path = vec![(x.clone(), eta.clone())];
        let mut e = self.evaluate(y, xi, &x, &eta, zeta0)?;
        let mut it = 0;
        let diverged = |res: f64, it: usize, path: Vec<(Vec<f64>, Vec<f64>)>| ScatmapError::NewtonDiverged {
            y: y.to_vec(),
            xi: xi.to_vec(),
            residual: res,
            iterations: it,
            path,
        };
        while e.res >= self.opts.tol {
            if it >= self.opts.max_iter || !e.res.is_finite() {
                if e.res < self.opts.accept {
                    break;
                }
                return Err(diverged(e.res, it, path));
            }
            it += 1;
            let j = stationary_jacobian(&e.hp, &e.hm);
            let step = solve(&j, &e.f).ok_or_else(|| diverged(e.res, it, path.clone()))?;
            let zeta = e.plus.grad_x.clone();
            let mut lambda = 1.0;
            let mut accepted = None;
            // near the noise floor a full step either helps or nothing will
            let floor = if e.res < self.opts.accept { 1.0 } else { 1.0 / 64.0 };
            while lambda >= floor {
                let tx: Vec<f64> = (0..d).map(|i| x[i] - lambda * step[i]).collect();
                let te: Vec<f64> = (0..d).map(|i| eta[i] - lambda * step[d + i]).collect();
                match self.evaluate(y, xi, &tx, &te, &zeta) {
                    Ok(t) if t.res < e.res => {
                        accepted = Some((tx, te, t));
                        break;
                    }
                    _ => lambda *= 0.5,
                }
            }
            match accepted {
                Some((tx, te, t)) => {
                    let stalled = t.res < self.opts.accept && t.res > 0.25 * e.res;
                    x = tx;
                    eta = te;
                    e = t;
                    path.push((x.clone(), eta.clone()));
                    if stalled {
                        break;
                    }
                }
                None if e.res < self.opts.accept => break,
                None => return Err(diverged(e.res, it, path)),
            }
        }
        Ok(StationaryPoint {
            y: y.to_vec(),
            xi: xi.to_vec(),
            residual_x: norm(&e.f[..d]),
            residual_y: norm(&e.f[d..]),
            zeta: e.minus.grad_x.clone(),
            x,
            eta,
            iterations: it,
            plus: e.plus,
            minus: e.minus,
            plus_hessian: e.hp,
            minus_hessian: e.hm,
        })
    }

    /// Newton from (x, η) = (y, ξ), with a coupling homotopy as fallback.
    pub fn solve_uncached(&self, y: &[f64], xi: &[f64]) -> Result<StationaryPoint, ScatmapError> {
        match self.newton(y, xi, y, xi, xi) {
            Ok(p) => Ok(p),
            Err(first) => {
                let model = self.model();
                if model.is_free() || self.opts.homotopy_steps == 0 {
                    return Err(first);
                }
                let (mut x, mut eta, mut zeta) = (y.to_vec(), xi.to_vec(), xi.to_vec());
                let n = self.opts.homotopy_steps;
                for k in 1..n {
                    let c = model.coupling() * k as f64 / n as f64;
                    let sub_phase = ScatteringPhase::with_wave_maps(
                        WaveMaps::with_options(&model.with_coupling(c), self.wm.opts.clone()),
                        ScatmapOptions { homotopy_steps: 0, ..self.opts.clone() },
                    );
                    let p = sub_phase.newton(y, xi, &x, &eta, &zeta).map_err(|_| first.clone())?;
                    x = p.x;
                    eta = p.eta;
                    zeta = p.zeta;
                }
                self.newton(y, xi, &x, &eta, &zeta).map_err(|_| first)
            }
        }
    }

    /// Newton from an explicit guess, bypassing the cache.
    pub fn solve_from(&self, y: &[f64], xi: &[f64], x: &[f64], eta: &[f64], zeta: &[f64]) -> Result<StationaryPoint, ScatmapError> {
        self.newton(y, xi, x, eta, zeta)
    }

    pub fn stationary_point(&self, y: &[f64], xi: &[f64]) -> Result<Arc<StationaryPoint>, ScatmapError> {
        let key: Key = y.iter().chain(xi).map(|v| v.to_bits()).collect();
        if let Some(p) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.solve_uncached(y, xi)?);
        Ok(self.cache.write().expect("cache lock").entry(key).or_insert(p).clone())
    }

    pub fn psi(&self, y: &[f64], xi: &[f64]) -> Result<f64, ScatmapError> {
        Ok(self.stationary_point(y, xi)?.psi())
    }

    /// Stationary point near `base`, warm-started from it.
    fn nearby(&self, base: &StationaryPoint, y: &[f64], xi: &[f64]) -> Result<StationaryPoint, ScatmapError> {
        self.newton(y, xi, &base.x, &base.eta, &base.zeta).or_else(|_| self.solve_uncached(y, xi))
    }

    /// Central FD of ψ in y.
    pub fn grad_y_fd(&self, y: &[f64], xi: &[f64]) -> Result<Vec<f64>, ScatmapError> {
        let base = self.stationary_point(y, xi)?;
        let h = self.opts.gradient_step * norm(y).max(1.0);
        let g = central_fd(|p| Ok(vec![self.nearby(&base, p, xi)?.psi()]), y, h)?;
        Ok(g.row(0).iter().copied().collect())
    }

    /// Central FD of ψ in ξ.
    pub fn grad_xi_fd(&self, y: &[f64], xi: &[f64]) -> Result<Vec<f64>, ScatmapError> {
        let base = self.stationary_point(y, xi)?;
        let h = self.opts.gradient_step * norm(xi).max(1.0);
        let g = central_fd(|p| Ok(vec![self.nearby(&base, y, p)?.psi()]), xi, h)?;
        Ok(g.row(0).iter().copied().collect())
    }

    /// ∂_y∂_ξψ(y,ξ) (rows y, columns ξ), by implicit differentiation of the
    /// stationary equations: ∂_ξ(x,η) = −J⁻¹ (∂ₓ∂_ξψ₊, 0).
    pub fn mixed_hessian_implicit(&self, y: &[f64], xi: &[f64]) -> Result<DMatrix<f64>, ScatmapError> {
        let p = self.stationary_point(y, xi)?;
        let d = y.len();
        let j = stationary_jacobian(&p.plus_hessian, &p.minus_hessian);
        let mut rhs = DMatrix::zeros(2 * d, d);
        rhs.view_mut((0, 0), (d, d)).copy_from(&p.plus_hessian.x_xi);
        let lu = j.lu();
        let sol = lu.solve(&rhs).ok_or(ScatmapError::SingularHessian { det: lu.determinant() })?;
        Ok(-sol.view((d, 0), (d, d)).clone_owned())
    }

    /// ∂_y∂_ξψ(y,ξ) by Richardson FD of η(y,ξ) = ∂_yψ in ξ.
    pub fn mixed_hessian(&self, y: &[f64], xi: &[f64]) -> Result<DMatrix<f64>, ScatmapError> {
        let base = self.stationary_point(y, xi)?;
        let h = self.opts.hessian_step * norm(xi).max(1.0);
        richardson_fd(|p| Ok(self.nearby(&base, y, p)?.eta), xi, h)
    }

    /// Θ(y,ξ) = |det ∂_y∂_ξψ|^{1/2}
    pub fn theta(&self, y: &[f64], xi: &[f64]) -> Result<f64, ScatmapError> {
        theta_of(&self.mixed_hessian(y, xi)?)
    }

    /// Θ from the implicit mixed Hessian; agrees with [`Self::theta`] to FD accuracy.
    pub fn theta_implicit(&self, y: &[f64], xi: &[f64]) -> Result<f64, ScatmapError> {
        theta_of(&self.mixed_hessian_implicit(y, xi)?)
    }

    /// Both sides of the Hessian identity, with every block by FD.
    pub fn hessian_identity_check(&self, y: &[f64], xi: &[f64]) -> Result<HessianCheck, ScatmapError> {
        let p = self.stationary_point(y, xi)?;
        let d = y.len();
        let wm = &self.wm;
        let (x, eta, zeta) = (&p.x, &p.eta, &p.zeta);
        let hx = self.opts.hessian_step * norm(x).max(1.0);
        let he = self.opts.hessian_step * norm(eta).max(1.0);
        let hxi = self.opts.hessian_step * norm(xi).max(1.0);
        let plus_x = |q: &[f64]| -> Result<Vec<f64>, ScatmapError> { Ok(wm.phase_with_guess(q, xi, Sign::Plus, Some(zeta))?.grad_x) };
        let minus_x = |q: &[f64]| -> Result<Vec<f64>, ScatmapError> { Ok(wm.phase_with_guess(q, eta, Sign::Minus, Some(zeta))?.grad_x) };
        let minus_at_eta = |q: &[f64]| -> Result<Vec<f64>, ScatmapError> {
            let data = wm.phase_with_guess(x, q, Sign::Minus, Some(zeta))?;
            Ok(data.grad_x.into_iter().chain(data.grad_xi).collect())
        };
        let plus_xx = richardson_fd(plus_x, x, hx)?;
        let minus_xx = richardson_fd(minus_x, x, hx)?;
        // columns η; rows: ∂ₓψ₋ (first d), ∂_ηψ₋ (last d)
        let minus_eta = richardson_fd(minus_at_eta, eta, he)?;
        let plus_x_xi = richardson_fd(|q: &[f64]| Ok(wm.phase_with_guess(x, q, Sign::Plus, Some(zeta))?.grad_x), xi, hxi)?;
        let mut full = DMatrix::zeros(2 * d, 2 * d);
        for r in 0..d {
            for c in 0..d {
                full[(r, c)] = minus_xx[(r, c)] - plus_xx[(r, c)];
                full[(r, d + c)] = minus_eta[(r, c)];
                full[(d + r, c)] = minus_eta[(c, r)];
                full[(d + r, d + c)] = minus_eta[(d + r, c)];
            }
        }
        let lhs = det(&full);
        let minus_x_eta = minus_eta.rows(0, d).into_owned();
        let scat = det(&self.mixed_hessian(y, xi)?);
        if scat.abs() < 1e-12 {
            return Err(ScatmapError::SingularHessian { det: scat });
        }
        let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
        let rhs = sign * det(&minus_x_eta) * det(&plus_x_xi) / scat;
        Ok(HessianCheck { lhs, rhs, rel_err: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE) })
    }

    /// Compares (FD ∂_ξψ, ξ) with w₊ ∘ w₋⁻¹ applied to (y, η(y,ξ)), where the
    /// inverse is taken at the stationary position x and confirmed by w₋.
    pub fn map_equivalence(&self, y: &[f64], xi: &[f64]) -> Result<MapCheck, ScatmapError> {
        let p = self.stationary_point(y, xi)?;
        let grad_xi_fd = self.grad_xi_fd(y, xi)?;
        let inv = self.wm.inverse_wave_map(&p.x, &p.eta, Sign::Minus)?;
        let back = self.wm.wave_map(&p.x, &inv.xi0, Sign::Minus)?;
        let inverse_defect = norm(&sub(&back.x_pm, y)).max(norm(&sub(&back.xi_pm, &p.eta)));
        let out = self.wm.wave_map(&p.x, &inv.xi0, Sign::Plus)?;
        let rel_err = (norm(&sub(&out.x_pm, &grad_xi_fd)) / norm(&out.x_pm).max(1.0)).max(norm(&sub(&out.xi_pm, xi)) / norm(xi).max(1.0));
        Ok(MapCheck { grad_xi_fd, composed_x: out.x_pm, composed_xi: out.xi_pm, inverse_defect, rel_err })
    }

    /// ψ restricted to T*_ηΣ: ψ(y,ξ) − (y·n)(η·n) with n = v(η)/|v(η)|, i.e. ψ at
    /// the representative of y orthogonal to v(η).
    pub fn psi_surface(&self, y: &[f64], xi: &[f64]) -> Result<f64, ScatmapError> {
        let p = self.stationary_point(y, xi)?;
        Ok(surface_value(self.model(), &p))
    }

    /// max_t |ψ̃(y + t·v(∂_yψ), ξ) − ψ̃(y, ξ)| in surface-adapted coordinates.
    pub fn invariance_check(&self, y: &[f64], xi: &[f64], ts: &[f64]) -> Result<f64, ScatmapError> {
        let base = self.stationary_point(y, xi)?;
        let v = self.model().eval_v(&base.eta);
        let reference = surface_value(self.model(), &base);
        let prop = self.wm.hj().propagator();
        let mut dev: f64 = 0.0;
        for &t in ts {
            if t == 0.0 {
                continue;
            }
            let yt: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let moved = prop.propagate(&base.x, &base.zeta, t, Variational::None).map_err(WaveMapError::from)?;
            let p = self.newton(&yt, xi, &moved.x, &base.eta, &moved.xi).or_else(|_| self.solve_uncached(&yt, xi))?;
            dev = dev.max((surface_value(self.model(), &p) - reference).abs());
        }
        Ok(dev)
    }
}

fn surface_value(model: &HamiltonianModel, p: &StationaryPoint) -> f64 {
    let v = model.eval_v(&p.eta);
    let nv = norm(&v);
    let n: Vec<f64> = v.iter().map(|a| a / nv).collect();
    p.psi() - dot(&p.y, &n) * dot(&p.eta, &n)
}

/// Deterministic (y, ξ) samples in the transverse region: p₀(ξ) ∈ I, and
/// y = b·n⊥ + a·v̂(ξ) with 5 ≤ |b| ≤ b_max and |a| ≤ b_max/2. Needs d ≥ 2.
pub fn sample_transverse(model: &HamiltonianModel, n: usize, b_max: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = model.dim();
    assert!(d >= 2, "transverse sampling needs d >= 2");
    let mut seq = crate::numerics::ScrambledHalton::new(3 + d, seed);
    model
        .sample_momentum_shell(0, n, seed ^ 0x5eed)
        .into_iter()
        .map(|xi| {
            let u = seq.next_point();
            let v = model.eval_v(&xi);
            let nv = norm(&v);
            let vh: Vec<f64> = v.iter().map(|a| a / nv).collect();
            // random direction with the v̂ component removed
            let mut w = crate::numerics::unit_vector(d, &u[3..]);
            if d == 2 {
                w = vec![-vh[1], vh[0]];
            } else {
                let c = dot(&w, &vh);
                w.iter_mut().zip(&vh).for_each(|(a, b)| *a -= c * b);
                let nw = norm(&w);
                w.iter_mut().for_each(|a| *a /= nw);
            }
            let b = (5.0 + (b_max - 5.0) * u[0]) * if u[1] < 0.5 { -1.0 } else { 1.0 };
            let a = b_max * (u[2] - 0.5);
            let y: Vec<f64> = (0..d).map(|i| b * w[i] + a * vh[i]).collect();
            (y, xi)
        })
        .collect()
}

/// p₀(∂_yψ(y,ξ)) − p₀(ξ) at a stationary point.
pub fn energy_defect(model: &HamiltonianModel, p: &StationaryPoint) -> f64 {
    model.eval_p0(&p.eta) - model.eval_p0(&p.xi)
}

/// |ψ(y,ξ) − y·ξ| for decay fits.
pub fn psi_excess(p: &StationaryPoint) -> f64 {
    (p.psi() - dot(&p.y, &p.xi)).abs()
}

/// Distance between η and ξ (deflection), for diagnostics.
pub fn deflection(p: &StationaryPoint) -> f64 {
    norm(&sub(&p.eta, &p.xi))
}

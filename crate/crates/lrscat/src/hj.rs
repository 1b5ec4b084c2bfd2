//! Hamilton–Jacobi solution φ(t,ξ) in the free frame by characteristics from
//! the origin: u(t,η), Λ_t(η) = ξ(0,η;t) and φ(t,ξ) = u(t, Λ_t⁻¹(ξ)).

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::model::HamiltonianModel;
use crate::numerics::{dot, mat_vec, norm, solve, sub};
use crate::propagate::{Propagator, Trapped, Variational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HjError {
    #[error("Newton iteration for the momentum map diverged (last residual {residual:e} after {iterations} iterations)")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("momentum {xi:?} lies outside the energy shell I4 (p0 = {energy})")]
    OutsideShell { xi: Vec<f64>, energy: f64 },
    #[error(transparent)]
    Trapped(#[from] Trapped),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

/// Characteristic data at (t, ξ): the converged η with Λ_t(η) ≈ ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct HjPoint {
    pub t: f64,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// X = x(0,η;t)
    pub x: Vec<f64>,
    /// Λ_t(η)
    pub lambda: Vec<f64>,
    /// K = ∫₀ᵗ X·∂ₓp ds
    pub k: f64,
    /// ∂X/∂η
    pub dx_deta: DMatrix<f64>,
    /// ∂Λ_t/∂η
    pub dl_deta: DMatrix<f64>,
    pub iterations: usize,
}

impl HjPoint {
    pub fn residual(&self) -> f64 {
        norm(&sub(&self.xi, &self.lambda))
    }

    /// ∂²_ξφ(t,ξ) = ∂X/∂η·(∂Λ/∂η)⁻¹
    pub fn hessian(&self) -> DMatrix<f64> {
        let inv = self.dl_deta.clone().try_inverse().expect("momentum Jacobian is invertible");
        &self.dx_deta * inv
    }

    /// ∂_ξφ(t,ξ), including the first-order Newton-residual correction.
    pub fn grad(&self) -> Vec<f64> {
        let r = sub(&self.xi, &self.lambda);
        let corr = mat_vec(&self.hessian(), &r);
        self.x.iter().zip(&corr).map(|(a, b)| a + b).collect()
    }

    /// φ(t,ξ) − t·p₀(ξ).
    pub fn phi_remainder(&self, model: &HamiltonianModel) -> f64 {
        let r = sub(&self.xi, &self.lambda);
        let v = model.eval_v(&self.xi);
        let lever: Vec<f64> = self.x.iter().zip(&v).map(|(a, b)| a - self.t * b).collect();
        self.t * model.eval_vr(&self.x, &self.lambda) - self.k + dot(&lever, &r)
    }
}

type Key = (u64, Vec<u64>);

/// Memoizing HJ evaluator. The cache key is the exact bit pattern of (t, ξ);
/// results never depend on whether a lookup hits.
#[derive(Debug)]
pub struct HjSolver {
    model: HamiltonianModel,
    prop: Propagator,
    pub newton: NewtonOptions,
    cache: RwLock<HashMap<Key, Arc<HjPoint>>>,
}

impl HjSolver {
    pub fn new(model: &HamiltonianModel) -> Self {
        Self::with_propagator(Propagator::new(model))
    }

    pub fn with_propagator(prop: Propagator) -> Self {
        Self { model: prop.model().clone(), prop, newton: NewtonOptions::default(), cache: RwLock::new(HashMap::new()) }
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn check_shell(&self, xi: &[f64]) -> Result<(), HjError> {
        let e = self.model.eval_p0(xi);
        if self.model.in_interval(4, e) {
            Ok(())
        } else {
            Err(HjError::OutsideShell { xi: xi.to_vec(), energy: e })
        }
    }

    /// u(t,η) = ∫₀ᵗ (p − x·∂ₓp)(x(0,η;s), ξ(0,η;s)) ds.
    pub fn action_u(&self, t: f64, eta: &[f64]) -> Result<f64, HjError> {
        let origin = vec![0.0; eta.len()];
        let s = self.prop.propagate(&origin, eta, t, Variational::None)?;
        Ok(t * self.model.eval_p(&origin, eta) - s.k)
    }

    /// Λ_t(η) = ξ(0,η;t).
    pub fn lambda_map(&self, t: f64, eta: &[f64]) -> Result<Vec<f64>, HjError> {
        let origin = vec![0.0; eta.len()];
        Ok(self.prop.propagate(&origin, eta, t, Variational::None)?.xi)
    }

    /// Newton solve of Λ_t(η) = ξ from `guess` without touching the cache.
    pub fn solve_uncached(&self, t: f64, xi: &[f64], guess: &[f64]) -> Result<HjPoint, HjError> {
        let d = xi.len();
        let origin = vec![0.0; d];
        let mut eta = guess.to_vec();
        let eval = |eta: &[f64]| self.prop.propagate(&origin, eta, t, Variational::Momentum);
        let mut s = eval(&eta)?;
        let mut res = norm(&sub(&s.xi, xi));
        let mut it = 0;
        while res >= self.newton.tol {
            if it >= self.newton.max_iter {
                return Err(HjError::NewtonDiverged { residual: res, iterations: it });
            }
            it += 1;
            let f = sub(&s.xi, xi);
            let step = solve(&s.dxi(), &f).ok_or(HjError::NewtonDiverged { residual: res, iterations: it })?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = eta.iter().zip(&step).map(|(e, d)| e - lambda * d).collect();
                let st = eval(&trial)?;
                let r = norm(&sub(&st.xi, xi));
                if r < res || lambda < 1e-3 {
                    eta = trial;
                    s = st;
                    res = r;
                    break;
                }
                lambda *= 0.5;
            }
            if !res.is_finite() {
                return Err(HjError::NewtonDiverged { residual: res, iterations: it });
            }
        }
        Ok(HjPoint {
            t,
            xi: xi.to_vec(),
            eta,
            x: s.x.clone(),
            lambda: s.xi.clone(),
            k: s.k,
            dx_deta: s.dx(),
            dl_deta: s.dxi(),
            iterations: it,
        })
    }

    /// Cached characteristic data at (t, ξ) without the shell gate.
    pub fn point(&self, t: f64, xi: &[f64]) -> Result<Arc<HjPoint>, HjError> {
        let key: Key = (t.to_bits(), xi.iter().map(|v| v.to_bits()).collect());
        if let Some(p) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.solve_uncached(t, xi, xi)?);
        Ok(self.cache.write().expect("cache lock").entry(key).or_insert(p).clone())
    }

    /// Λ_t⁻¹(ξ) for ξ ∈ Ω⁰_{I₄}, Newton from `guess` (default ξ).
    pub fn invert_lambda(&self, t: f64, xi: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>, HjError> {
        self.check_shell(xi)?;
        Ok(self.solve_uncached(t, xi, guess.unwrap_or(xi))?.eta)
    }

    pub fn phi(&self, t: f64, xi: &[f64]) -> Result<f64, HjError> {
        self.check_shell(xi)?;
        let p = self.point(t, xi)?;
        Ok(t * self.model.eval_p0(xi) + p.phi_remainder(&self.model))
    }

    /// φ(t,ξ) − t·p₀(ξ), free of the O(t) cancellation.
    pub fn phi_remainder(&self, t: f64, xi: &[f64]) -> Result<f64, HjError> {
        self.check_shell(xi)?;
        Ok(self.point(t, xi)?.phi_remainder(&self.model))
    }

    /// ∂_ξφ(t,ξ) = x(0,η;t) at η = Λ_t⁻¹(ξ).
    pub fn grad_phi(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>, HjError> {
        self.check_shell(xi)?;
        Ok(self.point(t, xi)?.grad())
    }
}

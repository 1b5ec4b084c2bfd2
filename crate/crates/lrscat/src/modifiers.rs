//! Principal-order modifier ingredients: Θ±, χ± and g±.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::flow::Sign;
use crate::model::HamiltonianModel;
use crate::numerics::{det, dot, norm, ramp, smooth_step, smooth_step_deriv};
use crate::wavemaps::{phase_step, WaveMapError, WaveMaps};

#[derive(Debug, Error)]
pub enum ModifierError {
    #[error("mixed Hessian determinant {det} is not positive")]
    SingularHessian { det: f64 },
    #[error(transparent)]
    WaveMap(#[from] WaveMapError),
}

/// Cutoff radii and angular thresholds of χ±.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub r0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl CutoffSpec {
    /// R₀ = 4R, β₁ = −0.75, β₂ = −0.25.
    pub fn for_model(model: &HamiltonianModel) -> Self {
        Self { r0: 4.0 * model.radius(), beta1: -0.75, beta2: -0.25 }
    }

    /// χ₁(x/R₀): 0 for |x| ≤ R₀, 1 for |x| ≥ 2R₀.
    pub fn chi1(&self, x: &[f64]) -> f64 {
        smooth_step(norm(x) / self.r0)
    }

    /// χ₂(λ): 1 on I₃, 0 outside I₄.
    pub fn chi2(&self, model: &HamiltonianModel, e: f64) -> f64 {
        let (a4, b4) = model.nested_interval(4);
        let (a3, b3) = model.nested_interval(3);
        ramp(e, a4, a3) * (1.0 - ramp(e, b3, b4))
    }

    /// χ₃,± as a function of s = ±cos: 0 for s ≤ β₁, 1 for s ≥ β₂.
    pub fn chi3(&self, s: f64) -> f64 {
        ramp(s, self.beta1, self.beta2)
    }
}

/// Pointwise evaluator for the modifier symbols of one model.
#[derive(Debug)]
pub struct Modifiers<'a> {
    pub wm: &'a WaveMaps,
    pub spec: CutoffSpec,
}

fn cos_angle(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

impl<'a> Modifiers<'a> {
    pub fn new(wm: &'a WaveMaps) -> Self {
        Self { wm, spec: CutoffSpec::for_model(wm.model()) }
    }

    pub fn with_spec(wm: &'a WaveMaps, spec: CutoffSpec) -> Self {
        Self { wm, spec }
    }

    fn model(&self) -> &HamiltonianModel {
        self.wm.model()
    }

    /// v(∂ₓψ±(x,ξ)).
    pub fn velocity(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<Vec<f64>, WaveMapError> {
        let g = self.wm.phase(x, xi, sign)?.grad_x;
        Ok(self.model().eval_v(&g))
    }

    /// Θ±(x,ξ) = det(∂ₓ∂_ξψ±)^{1/2} with the FD mixed Hessian.
    pub fn theta_pm(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<f64, ModifierError> {
        if self.model().is_free() {
            return Ok(1.0);
        }
        let m: DMatrix<f64> = self.wm.eikonal(sign).mixed_hessian(x, xi)?;
        let d = det(&m);
        if !(d > 0.0) {
            return Err(ModifierError::SingularHessian { det: d });
        }
        Ok(d.sqrt())
    }

    /// ½∂ₓ·v(∂ₓψ±)Θ± + v(∂ₓψ±)·∂ₓΘ± with central FD of relative step `h`.
    pub fn transport_residual_with_step(&self, x: &[f64], xi: &[f64], sign: Sign, h: f64) -> Result<f64, ModifierError> {
        let hx = h * norm(x).max(1.0);
        let theta = self.theta_pm(x, xi, sign)?;
        let v = self.velocity(x, xi, sign)?;
        let mut div = 0.0;
        let mut adv = 0.0;
        let mut p = x.to_vec();
        for i in 0..x.len() {
            p[i] = x[i] + hx;
            let va = self.velocity(&p, xi, sign)?;
            let ta = self.theta_pm(&p, xi, sign)?;
            p[i] = x[i] - hx;
            let vb = self.velocity(&p, xi, sign)?;
            let tb = self.theta_pm(&p, xi, sign)?;
            p[i] = x[i];
            div += (va[i] - vb[i]) / (2.0 * hx);
            adv += v[i] * (ta - tb) / (2.0 * hx);
        }
        Ok((0.5 * div * theta + adv).abs())
    }

    pub fn transport_residual(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<f64, ModifierError> {
        self.transport_residual_with_step(x, xi, sign, 1e-2)
    }

    /// χ±(x,ξ) = χ₁(x/R₀)χ₂(p₀(ξ))χ₃,±(±cos(x, v(∂ₓψ±(x,ξ)))).
    pub fn chi_pm(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<f64, WaveMapError> {
        let c1 = self.spec.chi1(x);
        if c1 == 0.0 {
            return Ok(0.0);
        }
        let c2 = self.spec.chi2(self.model(), self.model().eval_p0(xi));
        if c2 == 0.0 {
            return Ok(0.0);
        }
        let v = self.velocity(x, xi, sign)?;
        Ok(c1 * c2 * self.spec.chi3(sign.value() * cos_angle(x, &v)))
    }

    /// Central FD gradient of χ± in x.
    pub fn grad_chi(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<Vec<f64>, WaveMapError> {
        let h = phase_step(x);
        let mut g = vec![0.0; x.len()];
        let mut p = x.to_vec();
        for i in 0..x.len() {
            p[i] = x[i] + h;
            let a = self.chi_pm(&p, xi, sign)?;
            p[i] = x[i] - h;
            let b = self.chi_pm(&p, xi, sign)?;
            p[i] = x[i];
            g[i] = (a - b) / (2.0 * h);
        }
        Ok(g)
    }

    /// g±(x,ξ) = −i v(∂ₓψ±)·∂ₓχ±.
    pub fn g_principal(&self, x: &[f64], xi: &[f64], sign: Sign) -> Result<Complex64, WaveMapError> {
        let gc = self.grad_chi(x, xi, sign)?;
        if gc.iter().all(|&c| c == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let v = self.velocity(x, xi, sign)?;
        Ok(Complex64::new(0.0, -dot(&v, &gc)))
    }
}

/// Analytic derivative of χ₃ in s, for callers that differentiate along a known angle.
pub fn chi3_deriv(spec: &CutoffSpec, s: f64) -> f64 {
    smooth_step_deriv(1.0 + (s - spec.beta1) / (spec.beta2 - spec.beta1)) / (spec.beta2 - spec.beta1)
}

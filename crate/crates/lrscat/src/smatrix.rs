//! Energy surfaces Σ_λ with the measure m_λ, the surface-restricted phase,
//! assembly of S(λ) and the Z-integral check.
//!
//! For d = 2 the matrix is assembled in the angle chart of Σ_λ: nodes θ_j and
//! the conjugate variable L (angular momentum). For rotation-invariant models
//! the scattering map preserves L, the mixed Hessian in (L, θ) is the identity
//! and the phase reduces to one function F(L) with F′(L) = θ_out − θ_in:
//!
//!   S_jk = δ_jk + (Δθ/2π) Σ_m w_m τ(y_m) [e^{−iF(L_m)} − 1] e^{iL_m(θ_j − θ_k)},
//!
//! with L_m = −|ξ′|·y_m on the uniform y grid and τ the edge taper. The free
//! part is summed exactly, so V = 0 gives the identity.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::flow::Sign;
use crate::model::{HamiltonianModel, P0Family};
use crate::modifiers::{chi3_deriv, CutoffSpec, Modifiers};
use crate::numerics::{bisect, dot, integrate, norm, smooth_step, smooth_step_deriv, QuadratureFailure};
use crate::propagate::Variational;
use crate::scatmap::{ScatmapError, ScatteringPhase};
use crate::wavemaps::{WaveMapError, WaveMaps};

#[derive(Debug, thiserror::Error)]
pub enum SmatrixError {
    #[error("energy surface degenerate at node {node}: |v| = {speed:e} < {bound:e}")]
    SurfaceDegenerate { node: usize, speed: f64, bound: f64 },
    #[error("energy {lambda} outside I = [{}, {}]", .interval.0, .interval.1)]
    EnergyOutOfRange { lambda: f64, interval: (f64, f64) },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Scatmap(#[from] ScatmapError),
    #[error(transparent)]
    WaveMap(#[from] WaveMapError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureFailure),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Quadrature nodes on Σ_λ with weights for m_λ = |v(ξ)|⁻¹ dS.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySurfaceGrid {
    pub lambda: f64,
    pub dim: usize,
    /// θ (d = 2) or (θ, φ) (d = 3) per node.
    pub params: Vec<Vec<f64>>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Orthonormal tangent basis of T_ξΣ_λ per node.
    pub frames: Vec<Vec<Vec<f64>>>,
    /// |∂ξ/∂θ| per node (d = 2).
    pub chart_speed: Vec<f64>,
}

impl EnergySurfaceGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Ambient lift Σ y_a e_a of surface coordinates at node j.
    pub fn lift(&self, j: usize, y_local: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (a, e) in y_local.iter().zip(&self.frames[j]) {
            y.iter_mut().zip(e).for_each(|(yi, ei)| *yi += a * ei);
        }
        y
    }
}

/// Newton-polished radial root of p₀(rω) = λ.
fn polished_root(model: &HamiltonianModel, omega: &[f64], lambda: f64) -> Option<f64> {
    let mut r = model.radial_root(omega, lambda)?;
    for _ in 0..4 {
        let xi: Vec<f64> = omega.iter().map(|w| w * r).collect();
        let g = dot(&model.eval_v(&xi), omega);
        let f = model.eval_p0(&xi) - lambda;
        if f.abs() < 1e-15 || g == 0.0 {
            break;
        }
        r -= f / g;
    }
    Some(r)
}

/// Radial projection of ξ onto Σ_λ.
pub fn project_to_surface(model: &HamiltonianModel, xi: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = norm(xi);
    let omega: Vec<f64> = xi.iter().map(|a| a / n).collect();
    let r = polished_root(model, &omega, lambda)?;
    Some(omega.iter().map(|w| w * r).collect())
}

fn check_speed(model: &HamiltonianModel, j: usize, v: &[f64]) -> Result<f64, SmatrixError> {
    let speed = norm(v);
    let bound = 0.5 * model.c4();
    if !(speed >= bound) {
        return Err(SmatrixError::SurfaceDegenerate { node: j, speed, bound });
    }
    Ok(speed)
}

/// N nodes by angle (d = 2), or N polar Gauss–Legendre × 2N azimuthal nodes
/// (d = 3, quadratic p₀ only).
pub fn build_surface(model: &HamiltonianModel, lambda: f64, n: usize) -> Result<EnergySurfaceGrid, SmatrixError> {
    if n < 3 {
        return Err(SmatrixError::InvalidInput(format!("need at least 3 nodes, got {n}")));
    }
    let grid = match model.dim() {
        2 => surface_2d(model, lambda, n)?,
        3 => surface_3d(model, lambda, n)?,
        d => return Err(SmatrixError::Unsupported(format!("energy surfaces in dimension {d}"))),
    };
    if !model.in_interval(0, lambda) {
        return Err(SmatrixError::EnergyOutOfRange { lambda, interval: model.interval() });
    }
    Ok(grid)
}

fn surface_2d(model: &HamiltonianModel, lambda: f64, n: usize) -> Result<EnergySurfaceGrid, SmatrixError> {
    let h = 2.0 * PI / n as f64;
    let mut g = EnergySurfaceGrid {
        lambda,
        dim: 2,
        params: Vec::with_capacity(n),
        nodes: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        frames: Vec::with_capacity(n),
        chart_speed: Vec::with_capacity(n),
    };
    for j in 0..n {
        let th = h * j as f64;
        let omega = [th.cos(), th.sin()];
        let perp = [-omega[1], omega[0]];
        let r =
            polished_root(model, &omega, lambda).ok_or(SmatrixError::SurfaceDegenerate { node: j, speed: 0.0, bound: 0.5 * model.c4() })?;
        let xi = vec![r * omega[0], r * omega[1]];
        let v = model.eval_v(&xi);
        let speed = check_speed(model, j, &v)?;
        let dr = -r * dot(&v, &perp) / dot(&v, &omega);
        let tangent = [dr * omega[0] + r * perp[0], dr * omega[1] + r * perp[1]];
        let ts = norm(&tangent);
        g.params.push(vec![th]);
        g.nodes.push(xi);
        g.weights.push(h * ts / speed);
        g.frames.push(vec![vec![tangent[0] / ts, tangent[1] / ts]]);
        g.chart_speed.push(ts);
    }
    Ok(g)
}

fn surface_3d(model: &HamiltonianModel, lambda: f64, n: usize) -> Result<EnergySurfaceGrid, SmatrixError> {
    if model.p0_family() != P0Family::Quadratic {
        return Err(SmatrixError::Unsupported("d = 3 surfaces need quadratic p0".into()));
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 3"));
    let naz = 2 * n;
    let hphi = 2.0 * PI / naz as f64;
    let mut g = EnergySurfaceGrid {
        lambda,
        dim: 3,
        params: Vec::new(),
        nodes: Vec::new(),
        weights: Vec::new(),
        frames: Vec::new(),
        chart_speed: Vec::new(),
    };
    for &(c, wc) in rule.as_node_weight_pairs() {
        let s = (1.0 - c * c).sqrt();
        for k in 0..naz {
            let j = g.nodes.len();
            let phi = hphi * k as f64;
            let omega = [s * phi.cos(), s * phi.sin(), c];
            let r = polished_root(model, &omega, lambda).ok_or(SmatrixError::SurfaceDegenerate {
                node: j,
                speed: 0.0,
                bound: 0.5 * model.c4(),
            })?;
            let xi: Vec<f64> = omega.iter().map(|w| w * r).collect();
            let speed = check_speed(model, j, &model.eval_v(&xi))?;
            g.params.push(vec![c.acos(), phi]);
            g.nodes.push(xi);
            g.weights.push(wc * hphi * r * r / speed);
            g.frames.push(vec![vec![c * phi.cos(), c * phi.sin(), -s], vec![-phi.sin(), phi.cos(), 0.0]]);
            g.chart_speed.push(r);
        }
    }
    Ok(g)
}

/// ψ restricted to the tangent space at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedPhase {
    /// ψ̃(y′, ξ′)
    pub psi_tilde: f64,
    /// |det ∂_{y′}∂_{ξ′}ψ|^{1/2} in surface coordinates.
    pub theta_tilde: f64,
    /// Surface coordinates of ∂_yψ.
    pub eta_local: Vec<f64>,
    /// Ambient lift of y′.
    pub y: Vec<f64>,
}

/// Lifts y′ ∈ T_ξΣ_λ at node j to ambient y, evaluates ψ̃, and the volume
/// factor by central FD of ∂_yψ = η along the surface (frame held at node j).
pub fn restrict_phase(
    phase: &ScatteringPhase,
    grid: &EnergySurfaceGrid,
    y_local: &[f64],
    node: usize,
) -> Result<RestrictedPhase, SmatrixError> {
    let model = phase.model();
    let frame = &grid.frames[node];
    let xi = &grid.nodes[node];
    let y = grid.lift(node, y_local);
    let p = phase.stationary_point(&y, xi)?;
    let psi_tilde = phase.psi_surface(&y, xi)?;
    let eta_local: Vec<f64> = frame.iter().map(|e| dot(e, &p.eta)).collect();
    let k = frame.len();
    let h = 1e-5 * norm(xi).max(1.0);
    let mut m = DMatrix::zeros(k, k);
    for b in 0..k {
        let mut eta_pm = Vec::with_capacity(2);
        for s in [h, -h] {
            let moved: Vec<f64> = xi.iter().zip(&frame[b]).map(|(a, e)| a + s * e).collect();
            let on = project_to_surface(model, &moved, grid.lambda)
                .ok_or_else(|| SmatrixError::InvalidInput("surface projection failed".into()))?;
            eta_pm.push(phase.stationary_point(&y, &on)?.eta.clone());
        }
        for a in 0..k {
            m[(a, b)] = dot(&frame[a], &eta_pm[0]) / (2.0 * h) - dot(&frame[a], &eta_pm[1]) / (2.0 * h);
        }
    }
    Ok(RestrictedPhase { psi_tilde, theta_tilde: m.determinant().abs().sqrt(), eta_local, y })
}

/// One trajectory of a rotation-invariant model, labelled by angular momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedPhase {
    pub l: f64,
    /// F(L) = ψ₊ − ψ₋ + L(θ_out − θ_in)
    pub value: f64,
    /// θ_out − θ_in in (−π, π]
    pub deflection: f64,
    /// Closest-approach distance.
    pub impact: f64,
}

/// F(L) from the trajectory through its point of closest approach,
/// x = (0, −sgn(L)b), ξ = (k, 0) with b·k = |L| on Σ_λ.
pub fn reduced_phase(wm: &WaveMaps, lambda: f64, l: f64) -> Result<ReducedPhase, SmatrixError> {
    let model = wm.model();
    if model.dim() != 2 || !model.is_rotation_invariant() {
        return Err(SmatrixError::Unsupported("reduced phase needs a rotation-invariant d = 2 model".into()));
    }
    if model.is_free() {
        return Ok(ReducedPhase {
            l,
            value: 0.0,
            deflection: 0.0,
            impact: l.abs() / model.radial_root(&[1.0, 0.0], lambda).unwrap_or(1.0),
        });
    }
    let k = |b: f64| model.radial_root(&[1.0, 0.0], lambda - model.eval_vr(&[0.0, b], &[1.0, 0.0])).unwrap_or(0.0);
    let a = l.abs();
    let b = if a == 0.0 {
        0.0
    } else {
        let k_inf = model.radial_root(&[1.0, 0.0], lambda).unwrap_or(1.0);
        let mut hi = 2.0 * a / k_inf + 10.0;
        while hi * k(hi) <= a {
            hi *= 2.0;
        }
        bisect(|b| b * k(b) - a, 0.0, hi, 1e-13 * hi)
            .ok_or_else(|| SmatrixError::InvalidInput(format!("no closest approach for L = {l}")))?
    };
    let x = [0.0, if l > 0.0 { -b } else { b }];
    let z = [k(b), 0.0];
    let out = wm.wave_map(&x, &z, Sign::Plus)?;
    let inc = wm.wave_map(&x, &z, Sign::Minus)?;
    let angle = |v: &[f64]| v[1].atan2(v[0]);
    let mut defl = angle(&out.xi_pm) - angle(&inc.xi_pm);
    if defl > PI {
        defl -= 2.0 * PI;
    } else if defl <= -PI {
        defl += 2.0 * PI;
    }
    Ok(ReducedPhase { l, value: out.action - inc.action + l * defl, deflection: defl, impact: b })
}

/// Cosine taper on the outer 10% of [−Y, Y].
pub fn taper(y: f64, y_max: f64) -> f64 {
    let a = y.abs();
    let inner = 0.9 * y_max;
    if a <= inner {
        1.0
    } else if a >= y_max {
        0.0
    } else {
        0.5 * (1.0 + (PI * (a - inner) / (y_max - inner)).cos())
    }
}

/// Boundary integrand above 1e−4 of its maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationWarning {
    pub boundary: f64,
    pub max: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub lambda: f64,
    pub n: usize,
    pub y_max: f64,
    pub ny: usize,
    pub matrix: DMatrix<Complex64>,
    /// F(L) on the quadrature grid.
    pub phase_samples: Vec<ReducedPhase>,
    pub truncation: Option<TruncationWarning>,
    pub boundary_ratio: f64,
}

/// ‖A*A − I‖_op
pub fn unitarity_defect(a: &DMatrix<Complex64>) -> f64 {
    let n = a.ncols();
    let g = a.adjoint() * a - DMatrix::<Complex64>::identity(n, n);
    g.singular_values().max()
}

impl SMatrix {
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// max_{jk} |S − I|
    pub fn identity_defect(&self) -> f64 {
        let n = self.n;
        (self.matrix.clone() - DMatrix::<Complex64>::identity(n, n)).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// max_k |S_{k+Δ,k}| per angular offset Δ = 0..N/2.
    pub fn offset_profile(&self) -> Vec<f64> {
        let n = self.n;
        (0..=n / 2).map(|d| (0..n).map(|k| self.matrix[((k + d) % n, k)].norm()).fold(0.0, f64::max)).collect()
    }

    /// Rows j,k,Re,Im with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SmatrixError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["j", "k", "re", "im"])?;
        for j in 0..self.n {
            for k in 0..self.n {
                let z = self.matrix[(j, k)];
                wr.write_record([j.to_string(), k.to_string(), format!("{:.16e}", z.re), format!("{:.16e}", z.im)])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda": self.lambda,
            "N": self.n,
            "Y": self.y_max,
            "Ny": self.ny,
            "unitarity_defect": self.unitarity_defect(),
            "truncation": {
                "boundary_ratio": self.boundary_ratio,
                "warning": self.truncation,
            },
        })
    }
}

/// Symmetric node m of ny on [−Y, Y], so that y_m = −y_{ny−1−m} exactly.
fn grid_y(m: usize, ny: usize, dy: f64) -> f64 {
    dy * (m as f64 - 0.5 * (ny - 1) as f64)
}

/// S(λ) on a d = 2 grid with y ∈ [−Y, Y] sampled at Ny points.
pub fn build_smatrix(phase: &ScatteringPhase, grid: &EnergySurfaceGrid, y_max: f64, ny: usize) -> Result<SMatrix, SmatrixError> {
    let model = phase.model();
    if grid.dim != 2 {
        return Err(SmatrixError::Unsupported("S-matrix assembly is implemented for d = 2".into()));
    }
    if !(y_max > 0.0) || ny < 3 {
        return Err(SmatrixError::InvalidInput(format!("need Y > 0 and Ny >= 3, got Y = {y_max}, Ny = {ny}")));
    }
    let n = grid.len();
    let speed = grid.chart_speed[0];
    if !model.is_free() {
        if !model.is_rotation_invariant() {
            return Err(SmatrixError::Unsupported("S-matrix assembly with V != 0 needs a rotation-invariant model".into()));
        }
        if grid.chart_speed.iter().any(|s| ((s - speed) / speed).abs() > 1e-12) {
            return Err(SmatrixError::InvalidInput("grid is not a uniform circle".into()));
        }
    }
    let dy = 2.0 * y_max / (ny - 1) as f64;
    let mut cache: HashMap<u64, ReducedPhase> = HashMap::new();
    let mut samples = Vec::with_capacity(ny);
    for m in 0..ny {
        let y = grid_y(m, ny, dy);
        let l = -speed * y;
        // F is even in L for radial models
        let key = l.abs().to_bits();
        let r = match cache.get(&key) {
            Some(r) => *r,
            None => {
                let r = reduced_phase(phase.wave_maps(), grid.lambda, l.abs())?;
                cache.insert(key, r);
                r
            }
        };
        samples.push(ReducedPhase { l, value: r.value, deflection: r.deflection.copysign(l), impact: r.impact });
    }
    let amp: Vec<Complex64> = samples.iter().map(|s| Complex64::from_polar(1.0, -s.value) - 1.0).collect();
    let max = amp.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    let boundary = amp[0].norm().max(amp[ny - 1].norm());
    let boundary_ratio = if max > 0.0 { boundary / max } else { 0.0 };
    let truncation = (boundary_ratio > 1e-4).then_some(TruncationWarning { boundary, max, ratio: boundary_ratio });
    let h = 2.0 * PI / n as f64;
    let kernel: Vec<Complex64> = (0..n)
        .map(|d| {
            // offsets past N/2 are negative angles
            let dth = if 2 * d <= n { h * d as f64 } else { h * (d as f64 - n as f64) };
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, s) in samples.iter().enumerate() {
                let y = grid_y(m, ny, dy);
                let w = if m == 0 || m == ny - 1 { 0.5 * dy } else { dy } * speed * taper(y, y_max);
                if w != 0.0 && amp[m] != Complex64::new(0.0, 0.0) {
                    acc += amp[m] * Complex64::from_polar(w, s.l * dth);
                }
            }
            acc * (h / (2.0 * PI))
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |j, k| {
        let d = (j + n - k) % n;
        kernel[d] + if j == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    Ok(SMatrix { lambda: grid.lambda, n, y_max, ny, matrix, phase_samples: samples, truncation, boundary_ratio })
}

/// ∫Z₀₀ dt along y + t·v(∂_yψ(y,ξ)).
#[derive(Debug, Clone, PartialEq)]
pub struct ZIntegral {
    pub value: Complex64,
    /// −i[χ₋] between the window ends.
    pub telescoped: Complex64,
    /// |value − i|
    pub deviation: f64,
    pub window: (f64, f64),
}

/// Follows the interior trajectory of the stationary point: the point for
/// y + t·v(η) is the time-t image of (x, ζ), and ∂ₓ²ψ₋ is carried by the
/// variational matrix as H(t) = B A⁻¹ with (A; B) = J(t)(I; H(0)).
struct LineIntegrand<'a> {
    model: &'a HamiltonianModel,
    wm: &'a WaveMaps,
    spec: CutoffSpec,
    x: Vec<f64>,
    zeta: Vec<f64>,
    eta: Vec<f64>,
    h0: DMatrix<f64>,
}

struct LinePoint {
    x: Vec<f64>,
    w: Vec<f64>,
    chi: f64,
    grad: Vec<f64>,
}

impl LineIntegrand<'_> {
    fn at(&self, t: f64) -> Result<LinePoint, SmatrixError> {
        let d = self.x.len();
        let (x, zeta, hess) = if self.model.is_free() {
            (self.x.iter().zip(&self.model.eval_v(&self.zeta)).map(|(a, v)| a + t * v).collect(), self.zeta.clone(), DMatrix::zeros(d, d))
        } else {
            let s = self.wm.hj().propagator().propagate(&self.x, &self.zeta, t, Variational::Full).map_err(WaveMapError::from)?;
            let j = &s.jac;
            let a = j.view((0, 0), (d, d)) + j.view((0, d), (d, d)) * &self.h0;
            let b = j.view((d, 0), (d, d)) + j.view((d, d), (d, d)) * &self.h0;
            let ainv = a.try_inverse().ok_or_else(|| SmatrixError::InvalidInput("caustic on the line".into()))?;
            (s.x, s.xi, b * ainv)
        };
        let w = self.model.eval_v(&zeta);
        let dv = velocity_jacobian(self.model, &zeta);
        let jw = dv * hess;
        let nx = norm(&x);
        let nw = norm(&w);
        let cos = dot(&x, &w) / (nx * nw);
        let s = -cos;
        let r = nx / self.spec.r0;
        let c1 = smooth_step(r);
        let c2 = self.spec.chi2(self.model, self.model.eval_p0(&self.eta));
        let c3 = self.spec.chi3(s);
        let dc3 = chi3_deriv(&self.spec, s);
        let dc1 = smooth_step_deriv(r) / (self.spec.r0 * nx);
        let grad: Vec<f64> = (0..d)
            .map(|bi| {
                let mut dcos = w[bi] / (nx * nw) - cos * x[bi] / (nx * nx);
                for ai in 0..d {
                    dcos += (x[ai] / (nx * nw) - cos * w[ai] / (nw * nw)) * jw[(ai, bi)];
                }
                c2 * (c3 * dc1 * x[bi] - c1 * dc3 * dcos)
            })
            .collect();
        Ok(LinePoint { chi: c1 * c2 * c3, x, w, grad })
    }

    /// Im Z₀₀ = −v(ζ)·∂ₓχ₋
    fn value(&self, t: f64) -> Result<f64, SmatrixError> {
        let p = self.at(t)?;
        Ok(-dot(&p.w, &p.grad))
    }

    /// True once χ₋ is frozen for all later (dir = +1) or earlier (dir = −1) times.
    fn settled(&self, p: &LinePoint, dir: f64) -> bool {
        let s = -dot(&p.x, &p.w) / (norm(&p.x) * norm(&p.w));
        let outward = dir * dot(&p.x, &p.w) > 0.0;
        let far = norm(&p.x) >= 2.0 * self.spec.r0;
        outward && ((dir > 0.0 && s <= self.spec.beta1) || (dir < 0.0 && far && s >= self.spec.beta2))
    }
}

/// ∂v/∂ξ by central differences.
fn velocity_jacobian(model: &HamiltonianModel, xi: &[f64]) -> DMatrix<f64> {
    let d = xi.len();
    let h = f64::EPSILON.cbrt() * norm(xi).max(1.0);
    let mut m = DMatrix::zeros(d, d);
    let mut p = xi.to_vec();
    for b in 0..d {
        p[b] = xi[b] + h;
        let a = model.eval_v(&p);
        p[b] = xi[b] - h;
        let c = model.eval_v(&p);
        p[b] = xi[b];
        for i in 0..d {
            m[(i, b)] = (a[i] - c[i]) / (2.0 * h);
        }
    }
    m
}

pub fn z_integral_check(
    model: &HamiltonianModel,
    spec: &CutoffSpec,
    phase: &ScatteringPhase,
    y: &[f64],
    xi: &[f64],
) -> Result<ZIntegral, SmatrixError> {
    let wm = phase.wave_maps();
    let p = phase.stationary_point(y, xi)?;
    let h0 = if model.is_free() { DMatrix::zeros(y.len(), y.len()) } else { wm.phase_second(&p.x, &p.eta, Sign::Minus, None)?.1.xx };
    let f = LineIntegrand { model, wm, spec: *spec, x: p.x.clone(), zeta: p.zeta.clone(), eta: p.eta.clone(), h0 };
    let speed = norm(&model.eval_v(&p.zeta)).max(1e-3);
    let step = 0.1 * spec.r0 / speed;
    let mut ends = [0.0; 2];
    for (slot, dir) in [(0, -1.0), (1, 1.0)] {
        let mut t = 0.0;
        loop {
            t += dir * step;
            if f.settled(&f.at(t)?, dir) {
                break;
            }
            if t.abs() > 1e4 * step {
                return Err(SmatrixError::InvalidInput("line does not leave the transition shell".into()));
            }
        }
        ends[slot] = t;
    }
    let mut failure = None;
    let panels = ((ends[1] - ends[0]) / step).ceil().max(1.0) as usize;
    let im = integrate(
        |t| match f.value(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        ends[0],
        ends[1],
        panels,
        1e-10,
        1e-10,
        20_000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let value = Complex64::new(0.0, im);
    let telescoped = Complex64::new(0.0, f.at(ends[0])?.chi - f.at(ends[1])?.chi);
    Ok(ZIntegral { value, telescoped, deviation: (value - Complex64::i()).norm(), window: (ends[0], ends[1]) })
}

/// Z₀₀ at y + t·v(η) from a fresh stationary point and the FD symbol g₋.
pub fn z_integrand_direct(phase: &ScatteringPhase, spec: &CutoffSpec, y: &[f64], xi: &[f64], t: f64) -> Result<Complex64, SmatrixError> {
    let base = phase.stationary_point(y, xi)?;
    let v = phase.model().eval_v(&base.eta);
    let yt: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + t * b).collect();
    let p = phase.stationary_point(&yt, xi)?;
    let md = Modifiers::with_spec(phase.wave_maps(), *spec);
    Ok(md.g_principal(&p.x, &p.eta, Sign::Minus)?)
}

/// Z₀₀ at the same line point from the trajectory-following evaluator.
pub fn z_integrand_transported(
    phase: &ScatteringPhase,
    spec: &CutoffSpec,
    y: &[f64],
    xi: &[f64],
    t: f64,
) -> Result<Complex64, SmatrixError> {
    let model = phase.model();
    let wm = phase.wave_maps();
    let p = phase.stationary_point(y, xi)?;
    let h0 = if model.is_free() { DMatrix::zeros(y.len(), y.len()) } else { wm.phase_second(&p.x, &p.eta, Sign::Minus, None)?.1.xx };
    let f = LineIntegrand { model, wm, spec: *spec, x: p.x.clone(), zeta: p.zeta.clone(), eta: p.eta.clone(), h0 };
    Ok(Complex64::new(0.0, f.value(t)?))
}

//! Estimate verification: decay fits, integral bounds and the conformance bundle.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::flow::Sign;
use crate::model::{HamiltonianModel, P0Family};
use crate::modifiers::{CutoffSpec, Modifiers};
use crate::numerics::{det, dot, integrate, japanese, linear_fit, norm, sub, unit_vector, QuadratureFailure, ScrambledHalton};
use crate::propagate::Variational;
use crate::scatmap::{sample_transverse, ScatteringPhase};
use crate::smatrix::{build_smatrix, build_surface, z_integral_check};
use crate::wavemaps::WaveMaps;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureFailure),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The quantity vanishes identically, so there is nothing to fit.
    DegeneratePass,
    Skipped,
}

/// How `observed` is compared with `expected` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// |observed − expected| ≤ tolerance
    Within,
    /// observed < tolerance
    Below,
    /// observed ≥ expected
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub description: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub status: CheckStatus,
    pub sample_description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_uri: Option<String>,
    pub sample_columns: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl EstimateReport {
    fn new(id: &str, description: &str, comparison: Comparison, expected: f64, observed: f64, tolerance: f64) -> Self {
        let pass = match comparison {
            Comparison::Within => (observed - expected).abs() <= tolerance,
            Comparison::Below => observed < tolerance,
            Comparison::AtLeast => observed >= expected,
        };
        Self {
            id: id.into(),
            description: description.into(),
            expected,
            observed,
            tolerance,
            comparison,
            pass,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            sample_description: String::new(),
            diagnostic: None,
            samples_uri: None,
            sample_columns: Vec::new(),
            samples: Vec::new(),
        }
    }

    fn failed(id: &str, description: &str, diagnostic: String) -> Self {
        let mut r = Self::new(id, description, Comparison::Below, f64::NAN, f64::NAN, f64::NAN);
        r.pass = false;
        r.status = CheckStatus::Fail;
        r.diagnostic = Some(diagnostic);
        r
    }

    fn skipped(id: &str, description: &str, reason: &str) -> Self {
        let mut r = Self::new(id, description, Comparison::Below, f64::NAN, f64::NAN, f64::NAN);
        r.pass = true;
        r.status = CheckStatus::Skipped;
        r.diagnostic = Some(reason.into());
        r
    }

    fn degenerate(mut self) -> Self {
        self.pass = true;
        self.status = CheckStatus::DegeneratePass;
        self
    }

    fn with_samples(mut self, columns: &[&str], rows: Vec<Vec<f64>>, description: impl Into<String>) -> Self {
        self.sample_columns = columns.iter().map(|c| c.to_string()).collect();
        self.samples = rows;
        self.sample_description = description.into();
        self
    }

    fn with_diagnostic(mut self, d: impl Into<String>) -> Self {
        self.diagnostic = Some(d.into());
        self
    }
}

/// Least-squares slope of log value against log scale.
pub fn fit_decay(id: &str, samples: &[(f64, f64)], expected_slope: f64, tol: f64) -> Result<EstimateReport, VerifyError> {
    if samples.len() < 4 {
        return Err(VerifyError::InsufficientRange(format!("{} samples, need at least 4", samples.len())));
    }
    if let Some(&(s, v)) = samples.iter().find(|(s, v)| !(*s > 0.0 && *v > 0.0)) {
        return Err(VerifyError::InsufficientRange(format!("non-positive sample ({s}, {v})")));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-3) {
        return Err(VerifyError::InsufficientRange(format!("scales span [{lo}, {hi}], need two decades")));
    }
    let lx: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let slope = linear_fit(&lx, &ly).0;
    let rows = samples.iter().map(|&(s, v)| vec![s, v]).collect();
    Ok(EstimateReport::new(id, "log-log slope", Comparison::Within, expected_slope, slope, tol).with_samples(
        &["scale", "value"],
        rows,
        format!("{} samples on [{lo:e}, {hi:e}]", samples.len()),
    ))
}

/// ∫₁^∞ g for g ~ t^{−1−μ}; t = w^{−1/μ} makes the integrand bounded on (0, 1].
fn power_tail<F: Fn(f64) -> f64>(g: F, mu: f64) -> Result<f64, QuadratureFailure> {
    let k = 1.0 / mu;
    integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let t = w.powf(-k);
            g(t) * k * t / w
        },
        0.0,
        1.0,
        8,
        1e-15,
        1e-13,
        5000,
    )
}

/// ∫₀^∞ ⟨a;t⟩⁻¹⟨t⟩^{−μ} dt
pub fn elementary_integral(mu: f64, a: f64) -> Result<f64, QuadratureFailure> {
    let g = |t: f64| (1.0 + a * a + t * t).powf(-0.5) * (1.0 + t * t).powf(-0.5 * mu);
    let mut head = 0.0;
    // resolve the knee at t ≈ a before the tail takes over
    let knee = a.max(1.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while lo < knee {
        head += integrate(g, lo, hi, 4, 1e-15, 1e-13, 5000)?;
        lo = hi;
        hi *= 2.0;
    }
    Ok(head + lo * power_tail(|u| g(lo * u), mu)?)
}

/// lim_{a→∞} ⟨a⟩^μ ∫₀^∞ ⟨a;t⟩⁻¹⟨t⟩^{−μ} dt = ∫₀^∞ (1+u²)^{−1/2} u^{−μ} du.
pub fn elementary_limit(mu: f64) -> Result<f64, QuadratureFailure> {
    // u = w^{1/(1−μ)} removes the endpoint singularity on [0, 1]
    let k = 1.0 / (1.0 - mu);
    let head = integrate(|w| k * (1.0 + w.powf(2.0 * k)).powf(-0.5), 0.0, 1.0, 8, 1e-15, 1e-13, 5000)?;
    let tail = power_tail(|u| (1.0 + u * u).powf(-0.5) * u.powf(-mu), mu)?;
    Ok(head + tail)
}

/// sup_a ⟨a⟩^μ·∫ against its a → ∞ limit, plus the log-log trend over the top decade.
pub fn elementary_bound_check(mu: f64, a_list: &[f64]) -> Result<EstimateReport, VerifyError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(VerifyError::InsufficientRange(format!("mu = {mu} outside (0,1)")));
    }
    if a_list.is_empty() || a_list.iter().any(|a| !(0.0..=1e4).contains(a)) {
        return Err(VerifyError::InsufficientRange("a values must lie in [0, 1e4]".into()));
    }
    let limit = elementary_limit(mu)?;
    let mut rows = Vec::with_capacity(a_list.len());
    for &a in a_list {
        let i = elementary_integral(mu, a)?;
        rows.push(vec![a, i, japanese(&[a]).powf(mu) * i]);
    }
    let sup = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    let a_max = a_list.iter().cloned().fold(0.0, f64::max);
    let top: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] >= 0.1 * a_max && r[0] > 0.0).collect();
    let trend = if top.len() >= 2 {
        let lx: Vec<f64> = top.iter().map(|r| r[0].ln()).collect();
        let ly: Vec<f64> = top.iter().map(|r| r[2].ln()).collect();
        linear_fit(&lx, &ly).0
    } else {
        0.0
    };
    let mut r = EstimateReport::new(
        "elementary_bound",
        "sup of <a>^mu times the integral, against its a -> inf limit",
        Comparison::AtLeast,
        limit * (1.0 + 1e-9),
        sup,
        0.1,
    );
    r.pass = sup <= limit * (1.0 + 1e-9) && trend <= 0.1;
    r.status = if r.pass { CheckStatus::Pass } else { CheckStatus::Fail };
    r.comparison = Comparison::Below;
    r.tolerance = limit * (1.0 + 1e-9);
    Ok(r.with_samples(&["a", "integral", "scaled"], rows, format!("mu = {mu}, {} values of a", a_list.len()))
        .with_diagnostic(format!("top-decade log slope {trend:.4e} (limit 0.1)")))
}

/// Settings of [`run_conformance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformanceConfig {
    pub seed: u64,
    /// Points per sampled check.
    pub samples: usize,
    pub calibration_samples: usize,
    /// Check ids to run; empty runs all.
    pub checks: Vec<String>,
    pub lambda: f64,
    pub n: usize,
    pub y_max: f64,
    pub ny: usize,
    /// (y, ξ) lines for the Z-integral.
    pub z_lines: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Default for ConformanceConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 20,
            calibration_samples: 500,
            checks: Vec::new(),
            lambda: 0.5,
            n: 128,
            y_max: 60.0,
            ny: 1024,
            z_lines: default_z_lines(),
        }
    }
}

/// Ten lines at impact parameters 10..200 and rotated momenta.
pub fn default_z_lines() -> Vec<(Vec<f64>, Vec<f64>)> {
    [10.0, 20.0, 30.0, 45.0, 60.0, -15.0, -35.0, -70.0, 120.0, 200.0]
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let a = 0.6 * k as f64;
            let xi = vec![a.cos(), a.sin()];
            (vec![-b * xi[1], b * xi[0]], xi)
        })
        .collect()
}

pub const CHECK_IDS: [&str; 19] = [
    "convexity",
    "jacobian_det",
    "momentum_drift",
    "position_drift",
    "phi_growth",
    "phi_remainder_decay",
    "eikonal_phase_decay",
    "eikonal_residual",
    "map_equivalence",
    "hessian_identity",
    "flow_invariance",
    "theta_decay",
    "transport_residual",
    "elementary_bound",
    "surface_measure",
    "free_smatrix_identity",
    "unitarity_defect",
    "z_integral",
    "interaction_picture",
];

/// Unit direction (1, 0.1, 0, ...) scaled onto the middle of I.
fn reference_momentum(model: &HamiltonianModel) -> Vec<f64> {
    let d = model.dim();
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    if d > 1 {
        w[1] = 0.1;
    }
    let n = norm(&w);
    w.iter_mut().for_each(|a| *a /= n);
    let (a, b) = model.interval();
    let r = model.radial_root(&w, 0.5 * (a + b)).unwrap_or(1.0);
    w.iter().map(|v| v * r).collect()
}

fn e1(d: usize, l: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = l;
    x
}

/// Fits a slope unless every value vanishes.
fn slope_check(id: &str, description: &str, samples: &[(f64, f64)], expected: f64) -> EstimateReport {
    // round-off level counts as zero
    if samples.iter().all(|s| s.1.abs() <= 1e-9 * s.0.max(1.0)) {
        let rows = samples.iter().map(|&(s, v)| vec![s, v]).collect();
        return EstimateReport::new(id, description, Comparison::Within, expected, 0.0, 0.1)
            .degenerate()
            .with_samples(&["scale", "value"], rows, "identically zero")
            .with_diagnostic("quantity vanishes identically");
    }
    match fit_decay(id, samples, expected, 0.1) {
        Ok(mut r) => {
            r.description = description.into();
            r
        }
        Err(e) => EstimateReport::failed(id, description, e.to_string()),
    }
}

/// Outgoing points with r ∈ [r_lo, r_hi] within 60° of the momentum direction.
fn outgoing_points(model: &HamiltonianModel, n: usize, r_lo: f64, r_hi: f64, seed: u64) -> Samples {
    let d = model.dim();
    let mut h = ScrambledHalton::new(2 + d, seed);
    let xis = model.sample_momentum_shell(0, n, seed ^ 0x0a7);
    xis.into_iter()
        .map(|xi| {
            let u = h.next_point();
            let r = r_lo + (r_hi - r_lo) * u[0];
            let v = model.eval_v(&xi);
            let vh: Vec<f64> = v.iter().map(|a| a / norm(&v)).collect();
            let x = if d == 1 {
                vec![r * vh[0]]
            } else {
                let w = unit_vector(d, &u[2..]);
                // tilt by at most 60° away from v̂
                let c = dot(&w, &vh);
                let mut perp: Vec<f64> = w.iter().zip(&vh).map(|(a, b)| a - c * b).collect();
                let np = norm(&perp).max(1e-300);
                perp.iter_mut().for_each(|a| *a /= np);
                let ang = (u[1] - 0.5) * 2.0 * std::f64::consts::FRAC_PI_3;
                (0..d).map(|i| r * (ang.cos() * vh[i] + ang.sin() * perp[i])).collect()
            };
            (x, xi)
        })
        .collect()
}

type CheckResult = Result<EstimateReport, String>;
type Samples = Vec<(Vec<f64>, Vec<f64>)>;

fn run_check(id: &str, model: &HamiltonianModel, cfg: &ConformanceConfig) -> EstimateReport {
    let r = match id {
        "convexity" => check_convexity(model, cfg),
        "jacobian_det" => check_jacobian_det(model, cfg.samples, cfg.seed),
        "momentum_drift" => check_momentum_drift(model),
        "position_drift" => check_position_drift(model),
        "phi_growth" => check_phi_growth(model, cfg),
        "phi_remainder_decay" => check_phi_remainder(model),
        "eikonal_phase_decay" => check_eikonal_phase(model),
        "eikonal_residual" => check_eikonal_residual(model, cfg.samples, cfg.seed),
        "map_equivalence" => check_map_equivalence(model, cfg.samples, cfg.seed),
        "hessian_identity" => check_hessian_identity(model, cfg.samples, cfg.seed),
        "flow_invariance" => check_invariance(model, cfg.samples, cfg.seed),
        "theta_decay" => check_theta_decay(model),
        "transport_residual" => check_transport(model, cfg.samples, cfg.seed),
        "elementary_bound" => elementary_bound_check(model.mu(), &[0.0, 1.0, 10.0, 100.0, 1e3, 3e3, 1e4]).map_err(|e| e.to_string()),
        "surface_measure" => check_surface_measure(model, cfg),
        "free_smatrix_identity" => check_free_smatrix(model),
        "unitarity_defect" => check_unitarity(model, cfg),
        "z_integral" => check_z_integral(model, &cfg.z_lines),
        "interaction_picture" => check_interaction_picture(model, cfg.samples, cfg.seed),
        other => Err(format!("unknown check id {other}")),
    };
    r.unwrap_or_else(|e| EstimateReport::failed(id, "check aborted", e))
}

/// Runs the selected checks in declared order; failures never abort the run.
pub fn run_conformance(model: &HamiltonianModel, cfg: &ConformanceConfig) -> Vec<EstimateReport> {
    use rayon::prelude::*;
    let ids: Vec<&str> = CHECK_IDS.iter().copied().filter(|id| cfg.checks.is_empty() || cfg.checks.iter().any(|c| c == id)).collect();
    let calibrated = model.calibrated(cfg.calibration_samples, cfg.seed).map(|(m, _)| m).unwrap_or_else(|_| model.clone());
    let mut out: Vec<EstimateReport> = ids.par_iter().map(|id| run_check(id, &calibrated, cfg)).collect();
    if cfg.checks.is_empty() {
        out.push(EstimateReport::skipped(
            "higher_order_symbol_bounds",
            "symbol-class bounds for derivative orders above 2",
            "only orders |alpha| + |beta| <= 2 are sampled",
        ));
    }
    out
}

/// Writes `report.json`, an array of reports each tagged with the config hash,
/// and one `samples/<id>.csv` per check with samples.
pub fn write_bundle(dir: &Path, reports: &mut [EstimateReport], config_hash: &str) -> Result<(), VerifyError> {
    let sdir = dir.join("samples");
    fs::create_dir_all(&sdir)?;
    for r in reports.iter_mut() {
        if r.samples.is_empty() {
            continue;
        }
        let name = format!("samples/{}.csv", r.id);
        let mut f = fs::File::create(dir.join(&name))?;
        writeln!(f, "# config_sha256={config_hash}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&r.sample_columns)?;
        for row in &r.samples {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        r.samples_uri = Some(name);
    }
    let mut entries = Vec::with_capacity(reports.len());
    for r in reports.iter() {
        let mut v = serde_json::to_value(r)?;
        v["config_hash"] = serde_json::Value::from(config_hash);
        entries.push(v);
    }
    let mut f = fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, &entries)?;
    writeln!(f)?;
    Ok(())
}

pub fn check_convexity(model: &HamiltonianModel, cfg: &ConformanceConfig) -> CheckResult {
    let target = 0.5 * model.c4() * model.c4();
    let desc = "sampled min of {{|x|^2,p},p} on the energy shell after radius calibration";
    Ok(match model.calibrate_radius(cfg.calibration_samples, cfg.seed) {
        Ok(c) => EstimateReport::new("convexity", desc, Comparison::AtLeast, target, c.c5, 0.0)
            .with_diagnostic(format!("calibrated R = {} after {} doublings", c.radius, c.doublings)),
        Err(e) => EstimateReport::failed("convexity", desc, e.to_string()),
    })
}

/// min det(∂ξ/∂ξ₀) over trajectories from Ω_{I₅}, |t| ≤ 10³.
pub fn check_jacobian_det(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let prop = crate::propagate::Propagator::new(model);
    let pts = model.sample_energy_shell(5, n, 1e3, seed);
    let fwd: Vec<f64> = (1..=40).map(|k| 1e3 * k as f64 / 40.0).collect();
    let bwd: Vec<f64> = fwd.iter().map(|t| -t).collect();
    let mut rows = Vec::with_capacity(pts.len());
    for p in &pts {
        let start = prop.initial(&p.x, &p.xi, Variational::Momentum);
        let mut worst = f64::INFINITY;
        for ts in [&fwd, &bwd] {
            for s in prop.run(&start, ts).map_err(|e| e.to_string())? {
                worst = worst.min(det(&s.dxi()));
            }
        }
        rows.push(vec![norm(&p.x), norm(&p.xi), worst]);
    }
    let min = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    Ok(EstimateReport::new("jacobian_det", "min det of the momentum Jacobian along trajectories", Comparison::AtLeast, 0.5, min, 0.0)
        .with_samples(&["abs_x0", "abs_xi0", "min_det"], rows, format!("{} points of the I5 shell, |t| <= 1e3", pts.len())))
}

/// sup_t |ξ(t) − ξ₀| against ⟨x₀⟩ for the outgoing family x₀ = (L, 0, ...).
pub fn check_momentum_drift(model: &HamiltonianModel) -> CheckResult {
    let wm = WaveMaps::new(model);
    let prop = wm.hj().propagator();
    let xi0 = reference_momentum(model);
    let ts: Vec<f64> = (0..=24).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
    let mut samples = Vec::new();
    for l in [10.0, 100.0, 1000.0, 1e4] {
        let x0 = e1(model.dim(), l);
        let start = prop.initial(&x0, &xi0, Variational::None);
        let states = prop.run(&start, &ts).map_err(|e| e.to_string())?;
        let lim = wm.wave_map(&x0, &xi0, Sign::Plus).map_err(|e| e.to_string())?;
        let sup = states.iter().map(|s| norm(&sub(&s.xi, &xi0))).fold(norm(&sub(&lim.xi_pm, &xi0)), f64::max);
        samples.push((japanese(&x0), sup));
    }
    Ok(slope_check("momentum_drift", "sup_t |xi(t) - xi0| against <x0>", &samples, -model.mu()))
}

/// sup_t |y(t) − x₀| against |x₀|, with the limit x₊ included in the sup.
pub fn check_position_drift(model: &HamiltonianModel) -> CheckResult {
    let wm = WaveMaps::new(model);
    let xi0 = reference_momentum(model);
    let mut samples = Vec::new();
    for l in [1e3, 3e3, 1e4, 3e4, 1e5] {
        let x0 = e1(model.dim(), l);
        let lim = wm.wave_map(&x0, &xi0, Sign::Plus).map_err(|e| e.to_string())?;
        let mut sup = norm(&sub(&lim.x_pm, &x0));
        for t in [1e3, 1e4, 1e5] {
            let s = wm.interaction_flow(&x0, &xi0, t).map_err(|e| e.to_string())?;
            sup = sup.max(norm(&sub(&s.y, &x0)));
        }
        samples.push((l, sup));
    }
    Ok(slope_check("position_drift", "sup_t |y(t) - x0| against |x0|", &samples, 1.0 - model.mu()))
}

/// sup |φ(t,ξ)|/⟨t⟩ over t ∈ [1, 10⁴] against sup|p₀| + sup|V|.
pub fn check_phi_growth(model: &HamiltonianModel, cfg: &ConformanceConfig) -> CheckResult {
    let hj = crate::hj::HjSolver::new(model);
    let (a, b) = model.nested_interval(0);
    let bound = a.abs().max(b.abs()) + model.potential_sup();
    let mut rows = Vec::new();
    for xi in model.sample_momentum_shell(0, cfg.samples.min(8), cfg.seed) {
        for t in [1.0, 10.0, 100.0, 1e3, 1e4] {
            let phi = hj.phi(t, &xi).map_err(|e| e.to_string())?;
            rows.push(vec![t, model.eval_p0(&xi), phi.abs() / japanese(&[t])]);
        }
    }
    let sup = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    Ok(EstimateReport::new("phi_growth", "sup |phi(t,xi)| / <t>", Comparison::Below, bound, sup, bound).with_samples(
        &["t", "p0", "ratio"],
        rows,
        "momentum-shell sample, t in [1, 1e4]",
    ))
}

pub fn check_phi_remainder(model: &HamiltonianModel) -> CheckResult {
    let hj = crate::hj::HjSolver::new(model);
    let xi = reference_momentum(model);
    let mut samples = Vec::new();
    for k in 0..=8 {
        let t = 10f64.powf(2.0 + 0.25 * k as f64);
        samples.push((t, hj.phi_remainder(t, &xi).map_err(|e| e.to_string())?.abs()));
    }
    Ok(slope_check("phi_remainder_decay", "|phi(t,xi) - t p0(xi)| against t", &samples, 1.0 - model.mu()))
}

pub fn check_eikonal_phase(model: &HamiltonianModel) -> CheckResult {
    let wm = WaveMaps::new(model);
    let xi = reference_momentum(model);
    let dir: Vec<f64> = xi.iter().map(|v| v / norm(&xi)).collect();
    let mut samples = Vec::new();
    for k in 0..=6 {
        let r = 10f64.powf(2.0 + k as f64 / 3.0);
        let x: Vec<f64> = dir.iter().map(|d| r * d).collect();
        let v = wm.psi_pm(&x, &xi, Sign::Plus).map_err(|e| e.to_string())? - dot(&x, &xi);
        samples.push((r, v.abs()));
    }
    Ok(slope_check("eikonal_phase_decay", "|psi+(x,xi) - x.xi| along an outgoing ray", &samples, 1.0 - model.mu()))
}

/// max |p(x, ∂ₓψ₊) − p₀(ξ)| on outgoing points with |x| ∈ [20, 200].
pub fn check_eikonal_residual(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let wm = WaveMaps::new(model);
    let e = wm.eikonal(Sign::Plus);
    let mut rows = Vec::new();
    for (x, xi) in outgoing_points(model, n, 20.0, 200.0, seed) {
        let g = e.grad_x_fd(&x, &xi).map_err(|e| e.to_string())?;
        rows.push(vec![norm(&x), model.eval_p0(&xi), (model.eval_p(&x, &g) - model.eval_p0(&xi)).abs()]);
    }
    let max = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    Ok(EstimateReport::new("eikonal_residual", "max |p(x, d_x psi+) - p0(xi)|", Comparison::Below, 0.0, max, 1e-6).with_samples(
        &["abs_x", "p0", "residual"],
        rows,
        format!("{n} outgoing points, |x| in [20, 200]"),
    ))
}

fn transverse(model: &HamiltonianModel, n: usize, seed: u64) -> Result<Samples, String> {
    if model.dim() < 2 {
        return Err("transverse sampling needs d >= 2".into());
    }
    Ok(sample_transverse(model, n, 60.0, seed))
}

pub fn check_map_equivalence(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let sp = ScatteringPhase::new(model);
    let mut rows = Vec::new();
    for (y, xi) in transverse(model, n, seed)? {
        let c = sp.map_equivalence(&y, &xi).map_err(|e| e.to_string())?;
        rows.push(vec![norm(&y), c.rel_err, c.inverse_defect]);
    }
    let max = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    Ok(EstimateReport::new(
        "map_equivalence",
        "psi-derived map against wave_map composed with its inverse",
        Comparison::Below,
        0.0,
        max,
        1e-5,
    )
    .with_samples(&["abs_y", "rel_err", "inverse_defect"], rows, format!("{n} transverse (y, xi)")))
}

pub fn check_hessian_identity(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let sp = ScatteringPhase::new(model);
    let mut rows = Vec::new();
    for (y, xi) in transverse(model, n, seed)? {
        let h = sp.hessian_identity_check(&y, &xi).map_err(|e| e.to_string())?;
        rows.push(vec![norm(&y), h.lhs, h.rhs, h.rel_err]);
    }
    let max = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    Ok(EstimateReport::new(
        "hessian_identity",
        "full Hessian determinant against the product of mixed Hessians",
        Comparison::Below,
        0.0,
        max,
        1e-4,
    )
    .with_samples(&["abs_y", "lhs", "rhs", "rel_err"], rows, format!("{n} transverse (y, xi)")))
}

pub fn check_invariance(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let sp = ScatteringPhase::new(model);
    let ts = [-10.0, -7.5, -5.0, -2.5, -1.0, 1.0, 2.5, 5.0, 7.5, 10.0];
    let mut rows = Vec::new();
    for (y, xi) in transverse(model, n, seed)? {
        rows.push(vec![norm(&y), sp.invariance_check(&y, &xi, &ts).map_err(|e| e.to_string())?]);
    }
    let max = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    Ok(EstimateReport::new("flow_invariance", "surface phase shift along v(d_y psi), t in [-10, 10]", Comparison::Below, 0.0, max, 1e-6)
        .with_samples(&["abs_y", "deviation"], rows, format!("{n} transverse (y, xi)")))
}

pub fn check_theta_decay(model: &HamiltonianModel) -> CheckResult {
    let wm = WaveMaps::new(model);
    let md = Modifiers::new(&wm);
    let xi = reference_momentum(model);
    let mut samples = Vec::new();
    for r in [100.0, 300.0, 1000.0, 3000.0, 10000.0] {
        let x = e1(model.dim(), r);
        let t = md.theta_pm(&x, &xi, Sign::Plus).map_err(|e| e.to_string())?;
        samples.push((japanese(&x), (t - 1.0).abs()));
    }
    Ok(slope_check("theta_decay", "|Theta+ - 1| against <x>", &samples, -model.mu()))
}

pub fn check_transport(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let wm = WaveMaps::new(model);
    let md = Modifiers::new(&wm);
    let mut rows = Vec::new();
    for (x, xi) in outgoing_points(model, n, 100.0, 1000.0, seed) {
        rows.push(vec![norm(&x), md.transport_residual(&x, &xi, Sign::Plus).map_err(|e| e.to_string())?]);
    }
    let max = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    Ok(EstimateReport::new("transport_residual", "max transport-equation residual of Theta+", Comparison::Below, 0.0, max, 1e-3)
        .with_samples(&["abs_x", "residual"], rows, format!("{n} outgoing points, |x| in [100, 1000]")))
}

pub fn check_surface_measure(model: &HamiltonianModel, cfg: &ConformanceConfig) -> CheckResult {
    if model.dim() != 2 {
        return Ok(EstimateReport::skipped("surface_measure", "total surface measure", "defined for d = 2 curves"));
    }
    let (a, b) = model.interval();
    let mut rows = Vec::new();
    for k in 0..=4 {
        let lambda = a + (b - a) * k as f64 / 4.0;
        let coarse = build_surface(model, lambda, cfg.n).map_err(|e| e.to_string())?.total_measure();
        let fine = build_surface(model, lambda, 2 * cfg.n).map_err(|e| e.to_string())?.total_measure();
        rows.push(vec![lambda, coarse, fine]);
    }
    if model.p0_family() == P0Family::Quadratic {
        let dev = rows.iter().map(|r| (r[1] - 2.0 * std::f64::consts::PI).abs()).fold(0.0, f64::max);
        Ok(EstimateReport::new("surface_measure", "max |sum w - 2 pi| over lambda in I", Comparison::Below, 0.0, dev, 1e-12).with_samples(
            &["lambda", "measure_n", "measure_2n"],
            rows,
            format!("N = {}", cfg.n),
        ))
    } else {
        let dev = rows.iter().map(|r| ((r[1] - r[2]) / r[2]).abs()).fold(0.0, f64::max);
        Ok(EstimateReport::new("surface_measure", "relative change of sum w under doubling N", Comparison::Below, 0.0, dev, 1e-8)
            .with_samples(&["lambda", "measure_n", "measure_2n"], rows, format!("N = {} and {}", cfg.n, 2 * cfg.n)))
    }
}

pub fn check_free_smatrix(model: &HamiltonianModel) -> CheckResult {
    if model.dim() != 2 {
        return Ok(EstimateReport::skipped("free_smatrix_identity", "V = 0 S-matrix", "assembly is implemented for d = 2"));
    }
    let free = HamiltonianModel::free(2);
    let ph = ScatteringPhase::new(&free);
    let g = build_surface(&free, 0.5, 64).map_err(|e| e.to_string())?;
    let s = build_smatrix(&ph, &g, 40.0, 512).map_err(|e| e.to_string())?;
    Ok(EstimateReport::new(
        "free_smatrix_identity",
        "max |S - I| for V = 0, N = 64, Y = 40, Ny = 512",
        Comparison::Below,
        0.0,
        s.identity_defect(),
        1e-8,
    ))
}

/// ‖S*S − I‖ at the configured grid and its decrease when c is halved.
pub fn unitarity_pair(model: &HamiltonianModel, lambda: f64, n: usize, y_max: f64, ny: usize) -> Result<(f64, f64), String> {
    let defect = |m: &HamiltonianModel| -> Result<f64, String> {
        let ph = ScatteringPhase::new(m);
        let g = build_surface(m, lambda, n).map_err(|e| e.to_string())?;
        Ok(build_smatrix(&ph, &g, y_max, ny).map_err(|e| e.to_string())?.unitarity_defect())
    };
    Ok((defect(model)?, defect(&model.with_coupling(0.5 * model.coupling()))?))
}

pub fn check_unitarity(model: &HamiltonianModel, cfg: &ConformanceConfig) -> CheckResult {
    let desc = "||S*S - I||_op, and its value with c halved";
    if model.dim() != 2 || !(model.is_free() || model.is_rotation_invariant()) {
        return Ok(EstimateReport::skipped("unitarity_defect", desc, "assembly with V != 0 needs a rotation-invariant d = 2 model"));
    }
    let (d, half) = unitarity_pair(model, cfg.lambda, cfg.n, cfg.y_max, cfg.ny)?;
    let rows = vec![vec![model.coupling(), d], vec![0.5 * model.coupling(), half]];
    let info = format!("lambda = {}, N = {}, Y = {}, Ny = {}", cfg.lambda, cfg.n, cfg.y_max, cfg.ny);
    let r = EstimateReport::new("unitarity_defect", desc, Comparison::Below, 0.0, d, 0.1).with_samples(&["coupling", "defect"], rows, info);
    if model.is_free() {
        return Ok(r.degenerate().with_diagnostic("c = 0: halving is vacuous"));
    }
    let decreasing = half < d;
    let mut r = r.with_diagnostic(format!("defect with c/2: {half:.6e}"));
    r.pass &= decreasing;
    r.status = if r.pass { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(r)
}

pub fn check_z_integral(model: &HamiltonianModel, lines: &[(Vec<f64>, Vec<f64>)]) -> CheckResult {
    let sp = ScatteringPhase::new(model);
    let spec = CutoffSpec::for_model(model);
    let mut rows = Vec::new();
    for (y, xi) in lines {
        let z = z_integral_check(model, &spec, &sp, y, xi).map_err(|e| e.to_string())?;
        rows.push(vec![norm(y), z.value.re, z.value.im, z.deviation]);
    }
    let max = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    Ok(EstimateReport::new("z_integral", "max |integral of Z00 along the line - i|", Comparison::Below, 0.0, max, 1e-3).with_samples(
        &["abs_y", "re", "im", "deviation"],
        rows,
        format!("{} lines", lines.len()),
    ))
}

/// Subtraction path against the q-flow path on data from the energy shell, t ≤ 10³.
pub fn check_interaction_picture(model: &HamiltonianModel, n: usize, seed: u64) -> CheckResult {
    let wm = WaveMaps::new(model);
    let pts = model.sample_energy_shell(4, n, 200.0, seed);
    let mut h = ScrambledHalton::new(1, seed ^ 0x71);
    let mut rows = Vec::new();
    for p in &pts {
        let t = 1e3 * h.next_point()[0];
        let a = wm.interaction_flow(&p.x, &p.xi, t).map_err(|e| e.to_string())?;
        let b = wm.interaction_flow_q(&p.x, &p.xi, t, 1e-12).map_err(|e| e.to_string())?;
        let err = norm(&sub(&a.y, &b.y)).max(norm(&sub(&a.xi, &b.xi)));
        rows.push(vec![norm(&p.x), t, err]);
    }
    let max = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    Ok(EstimateReport::new("interaction_picture", "subtraction path against the q-flow path", Comparison::Below, 0.0, max, 1e-7)
        .with_samples(&["abs_x0", "t", "error"], rows, format!("{} shell points, t <= 1e3", pts.len())))
}

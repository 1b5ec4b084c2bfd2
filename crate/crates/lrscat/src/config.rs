//! JSON run configuration with reference-scenario defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flow::Sign;
use crate::model::{HamiltonianModel, P0Family, Potential};
use crate::verify::ConformanceConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema { pointer: pointer.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialFamily {
    Isotropic,
    Anisotropic,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub p0_family: P0Family,
    pub potential_family: PotentialFamily,
    /// ε of the anisotropic family.
    pub anisotropy: f64,
    pub coupling: f64,
    pub mu: f64,
    pub cutoff_radius: f64,
    pub energy_interval: [f64; 2],
    pub epsilon0: f64,
    /// Double R until the convexity bound holds before running.
    pub calibrate: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            p0_family: P0Family::Quadratic,
            potential_family: PotentialFamily::Isotropic,
            anisotropy: 0.0,
            coupling: 0.1,
            mu: 0.5,
            cutoff_radius: 10.0,
            energy_interval: [0.45, 0.55],
            epsilon0: 0.01,
            calibrate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub data: Vec<DataPoint>,
    pub t: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { data: vec![DataPoint { x: vec![-50.0, 5.0], xi: vec![1.0, 0.0] }], t: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeMomentum {
    pub t: f64,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HjConfig {
    pub points: Vec<TimeMomentum>,
}

impl Default for HjConfig {
    fn default() -> Self {
        Self { points: [10.0, 100.0, 1000.0].iter().map(|&t| TimeMomentum { t, xi: vec![1.0, 0.0] }).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignConfig {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl From<SignConfig> for Sign {
    fn from(s: SignConfig) -> Self {
        match s {
            SignConfig::Plus => Sign::Plus,
            SignConfig::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveMapConfig {
    pub data: Vec<DataPoint>,
    pub sign: SignConfig,
}

impl Default for WaveMapConfig {
    fn default() -> Self {
        Self { data: vec![DataPoint { x: vec![50.0, 0.0], xi: vec![1.0, 0.05] }], sign: SignConfig::Plus }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactMomentum {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatmapConfig {
    pub points: Vec<ImpactMomentum>,
}

impl Default for ScatmapConfig {
    fn default() -> Self {
        Self { points: vec![ImpactMomentum { y: vec![0.0, 20.0], xi: vec![1.0, 0.0] }] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmatrixConfig {
    pub lambda: f64,
    pub n: usize,
    pub y_max: f64,
    pub ny: usize,
}

impl Default for SmatrixConfig {
    fn default() -> Self {
        Self { lambda: 0.5, n: 128, y_max: 60.0, ny: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub model: ModelConfig,
    pub flow: FlowConfig,
    pub hj: HjConfig,
    pub wavemap: WaveMapConfig,
    pub scatmap: ScatmapConfig,
    pub smatrix: SmatrixConfig,
    pub verify: ConformanceConfig,
    /// Overridden by `--out`.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "reference".into(),
            model: ModelConfig::default(),
            flow: FlowConfig::default(),
            hj: HjConfig::default(),
            wavemap: WaveMapConfig::default(),
            scatmap: ScatmapConfig::default(),
            smatrix: SmatrixConfig::default(),
            verify: ConformanceConfig::default(),
            output_dir: None,
        }
    }
}

/// "a.b[2].c" → "/a/b/2/c"
fn to_pointer(path: &serde_path_to_error::Path) -> String {
    let mut p = String::new();
    for seg in path.iter() {
        match seg {
            serde_path_to_error::Segment::Seq { index } => {
                let _ = write!(p, "/{index}");
            }
            serde_path_to_error::Segment::Map { key } => {
                let _ = write!(p, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            serde_path_to_error::Segment::Enum { variant } => {
                let _ = write!(p, "/{variant}");
            }
            serde_path_to_error::Segment::Unknown => p.push_str("/?"),
        }
    }
    if p.is_empty() {
        p.push('/');
    }
    p
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = to_pointer(e.path());
        let mut message = e.into_inner().to_string();
        // serde_json appends " at line L column C"; the pointer already locates it
        if let Some(i) = message.find(" at line ") {
            message.truncate(i);
        }
        schema(pointer, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}

fn check_dim(pointer: String, v: &[f64], d: usize) -> Result<(), ConfigError> {
    if v.len() != d {
        return Err(schema(pointer, format!("expected {d} components, got {}", v.len())));
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(schema(pointer, "components must be finite"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !(1..=3).contains(&m.dim) {
            return Err(schema("/model/dim", "must be 1, 2 or 3"));
        }
        if !(m.mu > 0.0 && m.mu < 1.0) {
            return Err(schema("/model/mu", "must be in (0,1)"));
        }
        if !m.coupling.is_finite() {
            return Err(schema("/model/coupling", "must be finite"));
        }
        if !(m.cutoff_radius > 0.0 && m.cutoff_radius.is_finite()) {
            return Err(schema("/model/cutoff_radius", "must be positive"));
        }
        let [e0, e1] = m.energy_interval;
        if !(e0.is_finite() && e1.is_finite() && e0 <= e1) {
            return Err(schema("/model/energy_interval", "must be a finite [E0, E1] with E0 <= E1"));
        }
        if !(m.epsilon0 > 0.0 && m.epsilon0.is_finite()) {
            return Err(schema("/model/epsilon0", "must be positive"));
        }
        if !(m.anisotropy.abs() < 1.0) {
            return Err(schema("/model/anisotropy", "must satisfy |epsilon| < 1"));
        }
        let d = m.dim;
        for (i, p) in self.flow.data.iter().enumerate() {
            check_dim(format!("/flow/data/{i}/x"), &p.x, d)?;
            check_dim(format!("/flow/data/{i}/xi"), &p.xi, d)?;
        }
        if !self.flow.t.is_finite() {
            return Err(schema("/flow/t", "must be finite"));
        }
        for (i, p) in self.hj.points.iter().enumerate() {
            if !(p.t >= 0.0 && p.t.is_finite()) {
                return Err(schema(format!("/hj/points/{i}/t"), "must be non-negative"));
            }
            check_dim(format!("/hj/points/{i}/xi"), &p.xi, d)?;
        }
        for (i, p) in self.wavemap.data.iter().enumerate() {
            check_dim(format!("/wavemap/data/{i}/x"), &p.x, d)?;
            check_dim(format!("/wavemap/data/{i}/xi"), &p.xi, d)?;
        }
        for (i, p) in self.scatmap.points.iter().enumerate() {
            check_dim(format!("/scatmap/points/{i}/y"), &p.y, d)?;
            check_dim(format!("/scatmap/points/{i}/xi"), &p.xi, d)?;
        }
        let s = &self.smatrix;
        if !s.lambda.is_finite() {
            return Err(schema("/smatrix/lambda", "must be finite"));
        }
        if s.n < 4 {
            return Err(schema("/smatrix/n", "must be at least 4"));
        }
        if !(s.y_max > 0.0 && s.y_max.is_finite()) {
            return Err(schema("/smatrix/y_max", "must be positive"));
        }
        if s.ny < 8 {
            return Err(schema("/smatrix/ny", "must be at least 8"));
        }
        let v = &self.verify;
        if v.samples == 0 {
            return Err(schema("/verify/samples", "must be positive"));
        }
        if v.calibration_samples == 0 {
            return Err(schema("/verify/calibration_samples", "must be positive"));
        }
        for (i, id) in v.checks.iter().enumerate() {
            if !crate::verify::CHECK_IDS.contains(&id.as_str()) {
                return Err(schema(format!("/verify/checks/{i}"), format!("unknown check id {id:?}")));
            }
        }
        if v.n < 4 || v.ny < 8 || !(v.y_max > 0.0) {
            return Err(schema("/verify", "S-matrix grid must have n >= 4, ny >= 8, y_max > 0"));
        }
        for (i, (y, xi)) in v.z_lines.iter().enumerate() {
            check_dim(format!("/verify/z_lines/{i}/0"), y, d)?;
            check_dim(format!("/verify/z_lines/{i}/1"), xi, d)?;
        }
        Ok(())
    }

    /// Builds (and optionally calibrates) the model; constructor failures point at /model.
    pub fn build_model(&self) -> Result<HamiltonianModel, ConfigError> {
        let m = &self.model;
        let potential = match m.potential_family {
            PotentialFamily::Isotropic => Potential::Isotropic,
            PotentialFamily::Anisotropic => Potential::Anisotropic { epsilon: m.anisotropy },
            PotentialFamily::Zero => Potential::Zero,
        };
        let coupling = if m.potential_family == PotentialFamily::Zero { 0.0 } else { m.coupling };
        let model = HamiltonianModel::new(
            m.dim,
            m.p0_family,
            potential,
            coupling,
            m.mu,
            m.cutoff_radius,
            (m.energy_interval[0], m.energy_interval[1]),
            Some(m.epsilon0),
        )
        .map_err(|e| schema("/model", e.to_string()))?;
        if m.calibrate {
            let (model, _) = model
                .calibrated(self.verify.calibration_samples, self.verify.seed)
                .map_err(|e| schema("/model/cutoff_radius", e.to_string()))?;
            return Ok(model);
        }
        Ok(model)
    }

    /// SHA-256 of the canonical JSON form, defaults included.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

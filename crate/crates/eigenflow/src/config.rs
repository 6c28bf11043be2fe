//! Run configuration: JSON in, resolved-defaults echo out. Unknown keys are
//! hard errors so a typo in a tolerance name cannot silently weaken a check.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::forcing::ForcingSpec;
use crate::sphere::MonotoneDirection;
use crate::util::fnv1a64;

/// Initial surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Icosphere { radius: f64, subdivisions: u32 },
    Ellipsoid { a: f64, b: f64, c: f64, subdivisions: u32 },
    File { path: PathBuf },
}

impl std::fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShapeSpec::Icosphere { radius, subdivisions } => {
                write!(f, "icosphere r={radius} subdiv={subdivisions}")
            }
            ShapeSpec::Ellipsoid { a, b, c, subdivisions } => {
                write!(f, "ellipsoid ({a},{b},{c}) subdiv={subdivisions}")
            }
            ShapeSpec::File { path } => write!(f, "file {}", path.display()),
        }
    }
}

/// Flow stopping/stepping parameters (JSON face of [`FlowConfig`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(default = "defaults::cfl")]
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default = "defaults::h_cap")]
    pub h_cap: f64,
    #[serde(default = "defaults::min_area_fraction")]
    pub min_area_fraction: f64,
    #[serde(default = "defaults::snapshot_every")]
    pub snapshot_every: usize,
}

impl FlowParams {
    pub fn to_flow_config(&self) -> FlowConfig {
        FlowConfig {
            cfl: self.cfl,
            t_end: self.t_end,
            h_cap: self.h_cap,
            min_area_fraction: self.min_area_fraction,
            snapshot_every: self.snapshot_every,
        }
    }
}

/// Eigensolver parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(default = "defaults::p_values")]
    pub p_values: Vec<f64>,
    /// Residual tolerance of the linear (p = 2) eigensolver.
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    /// Stationarity tolerance of the p ≠ 2 descent.
    #[serde(default = "defaults::p_tol")]
    pub p_tol: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            p_values: defaults::p_values(),
            tol: defaults::tol(),
            p_tol: defaults::p_tol(),
            max_iter: defaults::max_iter(),
            seed: 0,
        }
    }
}

/// Monotonicity check request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneParams {
    pub direction: MonotoneDirection,
    #[serde(default = "defaults::monotone_tol")]
    pub tol: f64,
}

/// Check thresholds used by `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksParams {
    #[serde(default = "defaults::bound_tol")]
    pub bound_tol: f64,
    #[serde(default = "defaults::derivative_tol")]
    pub derivative_tol: f64,
    #[serde(default)]
    pub monotone: Option<MonotoneParams>,
}

impl Default for ChecksParams {
    fn default() -> Self {
        Self {
            bound_tol: defaults::bound_tol(),
            derivative_tol: defaults::derivative_tol(),
            monotone: None,
        }
    }
}

/// Output destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub dump_meshes: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self {
            dir: defaults::out_dir(),
            dump_meshes: false,
        }
    }
}

/// Full run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ShapeSpec,
    pub forcing: ForcingSpec,
    pub flow: FlowParams,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default)]
    pub checks: ChecksParams,
    #[serde(default)]
    pub output: OutputParams,
}

mod defaults {
    use std::path::PathBuf;

    pub fn cfl() -> f64 {
        0.5
    }
    pub fn h_cap() -> f64 {
        1e6
    }
    pub fn min_area_fraction() -> f64 {
        0.01
    }
    pub fn snapshot_every() -> usize {
        10
    }
    pub fn p_values() -> Vec<f64> {
        vec![2.0]
    }
    pub fn tol() -> f64 {
        1e-10
    }
    pub fn p_tol() -> f64 {
        1e-7
    }
    pub fn max_iter() -> usize {
        10_000
    }
    pub fn monotone_tol() -> f64 {
        1e-3
    }
    pub fn bound_tol() -> f64 {
        0.02
    }
    pub fn derivative_tol() -> f64 {
        0.05
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        // serde skips deny_unknown_fields on internally tagged unit
        // variants, so the forcing object is key-checked by hand
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if let Some(forcing) = value.get("forcing").and_then(|f| f.as_object()) {
            let allowed: &[&str] = match forcing.get("kind").and_then(|k| k.as_str()) {
                Some("constant") => &["kind", "c"],
                Some("table") => &["kind", "points"],
                _ => &["kind"],
            };
            for key in forcing.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::Parse(format!(
                        "config: unknown key `{key}` in forcing"
                    )));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Serialized form with every default made explicit.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Stable fingerprint of the resolved configuration.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serialization cannot fail");
        format!("{:016x}", fnv1a64(compact.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            ShapeSpec::Icosphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidInput(format!("icosphere radius {radius} must be positive")));
                }
            }
            ShapeSpec::Ellipsoid { a, b, c, .. } => {
                if !(*a > 0.0 && *b > 0.0 && *c > 0.0) {
                    return Err(Error::InvalidInput(format!("ellipsoid semi-axes ({a},{b},{c}) must be positive")));
                }
            }
            ShapeSpec::File { .. } => {}
        }
        self.forcing.validate()?;
        self.flow.to_flow_config().validate()?;
        for &p in &self.spectrum.p_values {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::InvalidInput(format!("p value {p} outside (1, inf)")));
            }
        }
        for (name, tol) in [
            ("spectrum.tol", self.spectrum.tol),
            ("spectrum.p_tol", self.spectrum.p_tol),
            ("checks.bound_tol", self.checks.bound_tol),
            ("checks.derivative_tol", self.checks.derivative_tol),
        ] {
            if !(tol > 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {tol} must be positive")));
            }
        }
        if let Some(m) = &self.checks.monotone {
            if !(m.tol >= 0.0) {
                return Err(Error::InvalidInput(format!("checks.monotone.tol = {} must be nonnegative", m.tol)));
            }
        }
        if self.spectrum.max_iter == 0 {
            return Err(Error::InvalidInput("spectrum.max_iter must be positive".into()));
        }
        Ok(())
    }
}

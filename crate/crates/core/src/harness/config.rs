//! JSON experiment configuration: parsing, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::integrator::{CoefficientSet, Drift, Jump, SimulationGrid};
use crate::noise::{MarkFamily, MarkMeasure};
use crate::operator::DiagonalGenerator;
use crate::stability::InitialLaw;

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_DIRECTORY: &str = "results";

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Missing { path: PathBuf, reason: String },
    Field { field: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Missing { path, reason } => write!(f, "cannot read config {}: {reason}", path.display()),
            ConfigError::Field { field, reason } => write!(f, "invalid config at `{field}`: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Field { field, .. } => Some(field),
            ConfigError::Missing { .. } => None,
        }
    }

    fn at(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        ConfigError::Field { field: field.into(), reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CertifyOperator,
    NoiseChecks,
    Simulate,
    YosidaGap,
    Stability,
    Contraction,
    Invariant,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CertifyOperator => "certify_operator",
            ExperimentKind::NoiseChecks => "noise_checks",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::YosidaGap => "yosida_gap",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Invariant => "invariant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    LaplacianDirichlet { n: usize },
    Explicit { eigenvalues: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientsConfig {
    /// `F = 0`, `f = 0`.
    Zero {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_drift: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_jump: Option<f64>,
    },
    /// `F(z) = drift_scale · z`, `f(u, z) = jump_scale · u_1 · z`.
    Linear {
        drift_scale: f64,
        jump_scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_drift: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_jump: Option<f64>,
    },
    /// `F = 0`, `f(u, z) = M u`.
    Additive {
        mark_map: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_drift: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_jump: Option<f64>,
    },
    /// `F(z) = -scale · tanh(z)`, `f(u, z) = scale · u_1 · tanh(z)`, modewise.
    Saturating {
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_drift: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_jump: Option<f64>,
    },
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        CoefficientsConfig::Zero { lipschitz_drift: None, lipschitz_jump: None }
    }
}

fn default_marks() -> MarkFamily {
    MarkFamily::Atoms { points: vec![vec![1.0], vec![-1.0]], weights: vec![1.0, 1.0] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub rate: f64,
    #[serde(default = "default_marks")]
    pub marks: MarkFamily,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { rate: 0.0, marks: default_marks() }
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, steps: DEFAULT_STEPS }
    }
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { paths: DEFAULT_PATHS, seed: 0 }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from(DEFAULT_DIRECTORY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory() }
    }
}

/// Experiment-specific parameters. Every field is optional in the file and
/// filled by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Initial state `ξ` (default: all ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    /// Second initial state `η` for stability runs (default: zeros).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    /// Resolvent parameters for the Hille–Yosida check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<u32>,
    /// `λ` of the Laplace-transform identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplace_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yosida_lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    /// Thresholds of the maximal inequality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// Integrand `f(s, u) = e^{-decay s} M u` of the noise checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand_map: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<InitialLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_tilde: Option<InitialLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    /// Points per empirical measure in contraction runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Number of grid times reported by `simulate` and `stability`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub params: Params,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." || path.is_empty() { "<root>".to_string() } else { path };
        ConfigError::at(field, e.into_inner())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Missing { path: path.to_path_buf(), reason: e.to_string() })?;
    parse_config(&text)
}

fn model_error(field: &str) -> impl Fn(Error) -> ConfigError + '_ {
    move |e| ConfigError::at(field, e)
}

impl ExperimentConfig {
    pub fn generator(&self) -> Result<DiagonalGenerator, ConfigError> {
        match &self.model {
            ModelConfig::LaplacianDirichlet { n } => {
                if *n == 0 {
                    return Err(ConfigError::at("model.n", "must be at least 1"));
                }
                DiagonalGenerator::laplacian_dirichlet(*n).map_err(model_error("model.n"))
            }
            ModelConfig::Explicit { eigenvalues } => {
                DiagonalGenerator::new(eigenvalues.clone()).map_err(model_error("model.eigenvalues"))
            }
        }
    }

    pub fn measure(&self) -> Result<MarkMeasure, ConfigError> {
        if !(self.noise.rate >= 0.0) || !self.noise.rate.is_finite() {
            return Err(ConfigError::at("noise.rate", "must be finite and nonnegative"));
        }
        MarkMeasure::new(self.noise.rate, self.noise.marks.clone()).map_err(model_error("noise.marks"))
    }

    pub fn coefficients(&self, dim: usize, measure: &MarkMeasure) -> Result<CoefficientSet, ConfigError> {
        let nonneg = |field: &'static str, v: Option<f64>| -> Result<Option<f64>, ConfigError> {
            match v {
                Some(x) if !(x >= 0.0) || !x.is_finite() => Err(ConfigError::at(field, "must be finite and nonnegative")),
                other => Ok(other),
            }
        };
        let finite = |field: &'static str, v: f64| -> Result<f64, ConfigError> {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ConfigError::at(field, "must be finite"))
            }
        };
        let (drift, jump, ld, lj) = match &self.coefficients {
            CoefficientsConfig::Zero { lipschitz_drift, lipschitz_jump } => {
                (Drift::Zero, Jump::Zero, *lipschitz_drift, *lipschitz_jump)
            }
            CoefficientsConfig::Linear { drift_scale, jump_scale, lipschitz_drift, lipschitz_jump } => (
                Drift::Linear(finite("coefficients.drift_scale", *drift_scale)?),
                Jump::Multiplicative { scale: finite("coefficients.jump_scale", *jump_scale)? },
                *lipschitz_drift,
                *lipschitz_jump,
            ),
            CoefficientsConfig::Additive { mark_map, lipschitz_drift, lipschitz_jump } => {
                if mark_map.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ConfigError::at("coefficients.mark_map", "entries must be finite"));
                }
                (Drift::Zero, Jump::Additive { map: mark_map.clone() }, *lipschitz_drift, *lipschitz_jump)
            }
            CoefficientsConfig::Saturating { scale, lipschitz_drift, lipschitz_jump } => {
                let s = finite("coefficients.scale", *scale)?;
                (Drift::Saturating(-s), Jump::Saturating { scale: s }, *lipschitz_drift, *lipschitz_jump)
            }
        };
        let ld = nonneg("coefficients.lipschitz_drift", ld)?;
        let lj = nonneg("coefficients.lipschitz_jump", lj)?;
        let set = CoefficientSet::new(dim, drift, jump, measure).map_err(model_error("coefficients"))?;
        Ok(set.with_declared(ld, lj))
    }

    pub fn grid(&self) -> Result<SimulationGrid, ConfigError> {
        if !(self.grid.horizon > 0.0) || !self.grid.horizon.is_finite() {
            return Err(ConfigError::at("grid.T", "must be positive and finite"));
        }
        if self.grid.steps == 0 {
            return Err(ConfigError::at("grid.steps", "must be at least 1"));
        }
        SimulationGrid::new(self.grid.horizon, self.grid.steps).map_err(model_error("grid"))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let generator = self.generator()?;
        let measure = self.measure()?;
        self.coefficients(generator.dim(), &measure)?;
        self.grid()?;
        let min_paths = if self.experiment == ExperimentKind::NoiseChecks { 1000 } else { 2 };
        if self.mc.paths < min_paths {
            return Err(ConfigError::at("mc.paths", format!("must be at least {min_paths}")));
        }
        let n = generator.dim();
        let alpha = generator.growth_rate();
        let p = &self.params;
        let vector = |field: &str, v: &Option<Vec<f64>>| -> Result<(), ConfigError> {
            match v {
                Some(v) if v.len() != n => Err(ConfigError::at(field, format!("expected {n} coordinates, got {}", v.len()))),
                Some(v) if v.iter().any(|x| !x.is_finite()) => Err(ConfigError::at(field, "must be finite")),
                _ => Ok(()),
            }
        };
        vector("params.initial", &p.initial)?;
        vector("params.eta", &p.eta)?;
        let resolvent = |field: &str, v: &Option<Vec<f64>>, increasing: bool| -> Result<(), ConfigError> {
            if let Some(v) = v {
                if v.is_empty() {
                    return Err(ConfigError::at(field, "must not be empty"));
                }
                if let Some(l) = v.iter().find(|l| !(**l > alpha) || !l.is_finite()) {
                    return Err(ConfigError::at(field, format!("{l} is not above the growth rate {alpha}")));
                }
                if increasing && v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ConfigError::at(field, "must be strictly increasing"));
                }
            }
            Ok(())
        };
        resolvent("params.lambdas", &p.lambdas, false)?;
        resolvent("params.yosida_lambdas", &p.yosida_lambdas, true)?;
        resolvent("params.n_list", &p.n_list, true)?;
        if let Some(l) = p.laplace_lambda {
            resolvent("params.laplace_lambda", &Some(vec![l]), false)?;
        }
        if p.r_max == Some(0) {
            return Err(ConfigError::at("params.r_max", "must be at least 1"));
        }
        if matches!(p.quadrature_steps, Some(s) if s < 2) {
            return Err(ConfigError::at("params.quadrature_steps", "must be at least 2"));
        }
        if let Some(e) = &p.epsilons {
            if e.is_empty() || e.iter().any(|x| !(*x > 0.0)) {
                return Err(ConfigError::at("params.epsilons", "must be positive"));
            }
        }
        if let Some(m) = &p.integrand_map {
            if m.len() != n || m.iter().any(|r| r.len() != measure.dim()) {
                return Err(ConfigError::at("params.integrand_map", format!("expected {n} rows of {} entries", measure.dim())));
            }
        }
        for (field, law) in [("params.rho", &p.rho), ("params.rho_tilde", &p.rho_tilde)] {
            if let Some(law) = law {
                law.validate().map_err(|e| ConfigError::at(field, e))?;
                if law.dim() != n {
                    return Err(ConfigError::at(field, format!("expected dimension {n}")));
                }
            }
        }
        if let Some(t) = &p.t_list {
            if t.is_empty() || t.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(ConfigError::at("params.t_list", "times must be finite and nonnegative"));
            }
        }
        if matches!(p.points, Some(k) if k == 0 || k > crate::transport::EXACT_LIMIT) {
            return Err(ConfigError::at("params.points", "must be between 1 and 1024"));
        }
        if matches!(p.samples, Some(k) if k < 4) {
            return Err(ConfigError::at("params.samples", "must be at least 4"));
        }
        for (field, v) in [("params.burn_in", p.burn_in), ("params.gap", p.gap), ("params.integrand_decay", p.integrand_decay)] {
            if matches!(v, Some(x) if !(x >= 0.0) || !x.is_finite()) {
                return Err(ConfigError::at(field, "must be finite and nonnegative"));
            }
        }
        if p.gap == Some(0.0) {
            return Err(ConfigError::at("params.gap", "must be positive"));
        }
        if p.report_points == Some(0) {
            return Err(ConfigError::at("params.report_points", "must be at least 1"));
        }
        Ok(())
    }

    /// Fills every experiment parameter that the file left out.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let generator = self.generator()?;
        let n = generator.dim();
        let shift = generator.growth_rate().max(0.0);
        let horizon = self.grid.horizon;
        let d = self.measure()?.dim();
        let p = &mut self.params;
        p.initial.get_or_insert_with(|| vec![1.0; n]);
        p.eta.get_or_insert_with(|| vec![0.0; n]);
        p.lambdas.get_or_insert_with(|| [1.0, 10.0, 100.0].iter().map(|l| l + shift).collect());
        p.r_max.get_or_insert(5);
        p.laplace_lambda.get_or_insert(1.0 + shift);
        p.quadrature_steps.get_or_insert(100_000);
        p.yosida_lambdas.get_or_insert_with(|| [10.0, 1e2, 1e3, 1e4].iter().map(|l| l + shift).collect());
        p.n_list.get_or_insert_with(|| [4.0, 16.0, 64.0, 256.0].iter().map(|l| l + shift).collect());
        p.epsilons.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
        p.integrand_map
            .get_or_insert_with(|| (0..n).map(|k| (0..d).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect());
        p.integrand_decay.get_or_insert(1.0);
        let initial = p.initial.clone().unwrap_or_default();
        let eta = p.eta.clone().unwrap_or_default();
        p.rho.get_or_insert(InitialLaw::Dirac { point: initial });
        p.rho_tilde.get_or_insert(InitialLaw::Dirac { point: eta });
        p.t_list.get_or_insert_with(|| (0..=4).map(|k| horizon * k as f64 / 4.0).collect());
        p.points.get_or_insert(256);
        p.samples.get_or_insert(2000);
        p.report_points.get_or_insert(100);
        Ok(self)
    }

    pub fn output_directory(&self) -> &Path {
        &self.output.directory
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"experiment": "simulate", "model": {"family": "laplacian_dirichlet", "n": 2}}"#;

    #[test]
    fn defaults_applied() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid.steps, 1000);
        assert_eq!(c.mc.paths, 10_000);
        assert_eq!(c.mc.seed, 0);
        assert_eq!(c.grid.horizon, 1.0);
        assert_eq!(c.output.directory, PathBuf::from("results"));
        let r = c.resolve().unwrap();
        assert_eq!(r.params.initial, Some(vec![1.0, 1.0]));
        assert_eq!(r.params.n_list, Some(vec![4.0, 16.0, 64.0, 256.0]));
    }

    #[test]
    fn negative_rate_names_field() {
        let text = r#"{"experiment": "simulate", "model": {"family": "explicit", "eigenvalues": [-1]},
                       "noise": {"rate": -1}}"#;
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.field(), Some("noise.rate"));
    }

    #[test]
    fn unknown_names_are_listed() {
        let text = r#"{"experiment": "simulate", "model": {"family": "explicit", "eigenvalues": [-1]},
                       "coefficients": {"preset": "cubic"}}"#;
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.field(), Some("coefficients.preset"));
        let msg = e.to_string();
        for name in ["zero", "linear", "additive", "saturating"] {
            assert!(msg.contains(name), "{msg}");
        }
        let text = r#"{"experiment": "teleport", "model": {"family": "explicit", "eigenvalues": [-1]}}"#;
        assert_eq!(parse_config(text).unwrap_err().field(), Some("experiment"));
        let text = r#"{"experiment": "simulate", "model": {"family": "explicit", "eigenvalues": [-1]}, "extra": 1}"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn type_errors_carry_paths() {
        let text = r#"{"experiment": "simulate", "model": {"family": "explicit", "eigenvalues": [-1]},
                       "grid": {"T": "long"}}"#;
        assert_eq!(parse_config(text).unwrap_err().field(), Some("grid.T"));
        let text = r#"{"experiment": "yosida_gap", "model": {"family": "explicit", "eigenvalues": [2]},
                       "params": {"n_list": [1, 4]}}"#;
        assert_eq!(parse_config(text).unwrap_err().field(), Some("params.n_list"));
    }

    #[test]
    fn missing_file() {
        let e = load_config(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(e, ConfigError::Missing { .. }));
    }
}

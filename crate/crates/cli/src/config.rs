//! Experiment configuration file (JSON). Unknown keys are rejected.

use std::path::Path;

use diffest::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// `f(x) = constant + Σ (cos·cos kx + sin·sin kx)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<FourierTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            modes: Vec::new(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.modes.iter().fold(self.constant, |acc, m| {
            let kx = m.k as f64 * x;
            acc + m.cos * kx.cos() + m.sin * kx.sin()
        })
    }
}

/// Synthetic truth used by `simulate` and `sweep`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    /// True diffusivity; defaults to the constant `kappa0`.
    #[serde(default)]
    pub kappa: Option<FieldSpec>,
    /// Noise overrides for the truth run; default to the model values.
    #[serde(default)]
    pub alpha1: Option<f64>,
    #[serde(default)]
    pub alpha2: Option<f64>,
    /// Noise-free steps run before the recorded window to reach a quasi-steady state.
    #[serde(default)]
    pub spinup_steps: usize,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_kernel_scale")]
    pub kernel_scale: f64,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol: default_tol(),
            kernel_scale: default_kernel_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Known heat source `S(x)`.
    #[serde(default)]
    pub source: FieldSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_measure_every")]
    pub measure_every: usize,
    #[serde(default)]
    pub truth: TruthSpec,
    #[serde(default)]
    pub estimate: EstimateSpec,
}

fn default_refinement() -> usize {
    1
}
fn default_max_iters() -> usize {
    10
}
fn default_tol() -> f64 {
    1e-4
}
fn default_kernel_scale() -> f64 {
    diffest::mean_iteration::DEFAULT_KERNEL_SCALE
}
fn default_measure_every() -> usize {
    1
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub measure_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(n) = o.max_iters {
            self.estimate.max_iters = n;
        }
        if let Some(tol) = o.tol {
            self.estimate.tol = tol;
        }
        if let Some(every) = o.measure_every {
            self.measure_every = every;
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate()?;
        if self.measure_every == 0 {
            return Err(CliError::Config("measure_every must be at least 1".into()));
        }
        if !(self.estimate.tol >= 0.0) {
            return Err(CliError::Config(format!("estimate.tol must be nonnegative, got {}", self.estimate.tol)));
        }
        if !(self.estimate.kernel_scale > 0.0) {
            return Err(CliError::Config("estimate.kernel_scale must be positive".into()));
        }
        if self.truth.refinement == 0 {
            return Err(CliError::Config("truth.refinement must be at least 1".into()));
        }
        Ok(())
    }

    pub fn truth_kappa(&self) -> FieldSpec {
        self.truth
            .kappa
            .clone()
            .unwrap_or_else(|| FieldSpec::constant(self.model.kappa0))
    }

    /// Model parameters used for the truth run.
    pub fn truth_model(&self) -> ModelConfig {
        ModelConfig {
            alpha1: self.truth.alpha1.unwrap_or(self.model.alpha1),
            alpha2: self.truth.alpha2.unwrap_or(self.model.alpha2),
            ..self.model.clone()
        }
    }

    pub fn truth_seed(&self) -> u64 {
        self.seed
    }

    pub fn measurement_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use subfrac_core::fractional_solver::SweepFamily;
use subfrac_core::{GeneratorModel, LevySpec, McConfig, TimeGrid};

use crate::CliError;

/// Where the generator comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Scalar {
        theta: f64,
    },
    DirichletLaplacian1d {
        n: usize,
        h: f64,
    },
    Inline {
        model: GeneratorModel,
    },
    /// Path to a model document, relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    /// Horizon of the hitting identity.
    #[serde(default = "one")]
    pub s: f64,
    /// Level of the hitting identity.
    #[serde(default = "one")]
    pub t: f64,
    /// Times for the path-integral check; the grid end when absent.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Drift added in the third path-integral check.
    #[serde(default = "one")]
    pub kappa: f64,
    /// Starting state of the occupation check; the middle domain state when absent.
    #[serde(default)]
    pub start: Option<usize>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            s: 1.0,
            t: 1.0,
            times: None,
            kappa: 1.0,
            start: None,
            lambdas: default_lambdas(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 5.0]
}

fn default_mc() -> McConfig {
    McConfig::new(0, 100_000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: LevySpec,
    pub model: ModelSource,
    pub grid: TimeGrid,
    /// Initial vector; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default = "default_mc")]
    pub mc: McConfig,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// A parsed config with command-line overrides applied and the model built.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: GeneratorModel,
    pub initial: Vec<f64>,
    pub prefix: PathBuf,
    pub hash: String,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
}

impl Experiment {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = overrides.seed {
            config.mc.seed = seed;
        }
        if let Some(n) = overrides.samples {
            config.mc.n_samples = n;
        }
        if config.mc.n_samples == 0 {
            return Err(CliError::Config("mc.n_samples must be at least 1".into()));
        }
        config.grid.validate().map_err(config_err)?;

        let base = path.parent().unwrap_or(Path::new("."));
        let model = match &config.model {
            ModelSource::Scalar { theta } => GeneratorModel::scalar(*theta),
            ModelSource::DirichletLaplacian1d { n, h } => {
                GeneratorModel::dirichlet_laplacian_1d(*n, *h)
            }
            ModelSource::Inline { model } => Ok(model.clone()),
            ModelSource::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
                return Self::finish(
                    config.clone(),
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?,
                    overrides,
                );
            }
        }
        .map_err(config_err)?;
        Self::finish(config, model, overrides)
    }

    fn finish(
        config: ExperimentConfig,
        model: GeneratorModel,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        let initial = config
            .initial
            .clone()
            .unwrap_or_else(|| vec![1.0; model.dim()]);
        if initial.len() != model.dim() {
            return Err(CliError::Config(format!(
                "initial has {} entries, model has {} states",
                initial.len(),
                model.dim()
            )));
        }
        if initial.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("initial entries must be finite".into()));
        }
        let prefix = match (&overrides.out, &config.output) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => PathBuf::from(p),
            (None, None) => {
                return Err(CliError::Config(
                    "no output prefix: set `output` or pass --out".into(),
                ))
            }
        };
        let hash = config_hash(&config);
        Ok(Self {
            config,
            model,
            initial,
            prefix,
            hash,
        })
    }

    pub fn output_path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    }

    pub fn seed(&self) -> u64 {
        self.config.mc.seed
    }
}

fn config_err(e: subfrac_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// SHA-256 of the canonical (sorted-key) form of the effective config,
/// leaving out the output prefix.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output = None;
    let canonical = serde_json::to_value(&c)
        .expect("config serializes")
        .to_string();
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

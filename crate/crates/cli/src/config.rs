//! JSON run configurations. Unknown keys are rejected; command-line flags
//! override the file.

use std::path::{Path, PathBuf};

use momentmp::energy::SplitScheme;
use momentmp::regression::{DivergenceSetup, GlmMode, ScoreMethod, DEFAULT_MC_DRAWS};
use momentmp::resampling::BootstrapMode;
use momentmp::Concentration;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dgp {
    Normal { mean: f64, variance: f64 },
    SkewNormal { xi: f64, omega: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mixture,
    Bb,
    /// Moment-tied predictive with `c = +inf`.
    Parametric,
    /// Score-driven parametric update.
    ParametricScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Loocv,
    Kfold(usize),
    Holdout(f64),
}

impl Selection {
    pub fn scheme(self) -> SplitScheme {
        match self {
            Selection::Loocv => SplitScheme::Loocv,
            Selection::Kfold(j) => SplitScheme::KFold(j),
            Selection::Holdout(f) => SplitScheme::Holdout { validation_fraction: f },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbMode {
    Direct,
    Sequential,
}

impl From<BbMode> for BootstrapMode {
    fn from(m: BbMode) -> Self {
        match m {
            BbMode::Direct => BootstrapMode::Direct,
            BbMode::Sequential => BootstrapMode::Sequential,
        }
    }
}

/// Where univariate data comes from: a generator or a CSV column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnivariateSource {
    pub dgp: Option<Dgp>,
    pub n: Option<usize>,
    pub csv: Option<PathBuf>,
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub replicates: usize,
    /// Defaults to `n + 1500`.
    pub horizon: Option<usize>,
    #[serde(flatten)]
    pub data: UnivariateSource,
    pub method: Method,
    /// Fixed concentration (`"inf"` allowed); selected by `selection` when absent.
    pub c: Option<String>,
    pub selection: Selection,
    pub bb_mode: BbMode,
    pub quantiles: Vec<f64>,
    pub path_stride: Option<usize>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicates: 1000,
            horizon: None,
            data: UnivariateSource::default(),
            method: Method::Mixture,
            c: None,
            selection: Selection::Loocv,
            bb_mode: BbMode::Direct,
            quantiles: vec![0.5, 0.95],
            path_stride: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreChoice {
    Exact,
    MonteCarlo,
}

/// Binary-response regression data: a CSV file or a synthetic logistic model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSource {
    pub csv: Option<PathBuf>,
    pub target: Option<String>,
    pub features: Vec<String>,
    pub synthetic: Option<SyntheticLogistic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLogistic {
    pub n: usize,
    /// Intercept first; one standard-normal covariate per further entry.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionScoring {
    pub folds: usize,
    pub score: ScoreChoice,
    pub mc_draws: usize,
    /// Overrides the default grid of concentrations.
    pub grid: Option<Vec<String>>,
}

impl Default for RegressionScoring {
    fn default() -> Self {
        Self {
            folds: 5,
            score: ScoreChoice::Exact,
            mc_draws: DEFAULT_MC_DRAWS,
            grid: None,
        }
    }
}

impl RegressionScoring {
    pub fn method(&self) -> ScoreMethod {
        match self.score {
            ScoreChoice::Exact => ScoreMethod::Exact,
            ScoreChoice::MonteCarlo => ScoreMethod::MonteCarlo { draws: self.mc_draws },
        }
    }

    pub fn grid(&self) -> CliResult<Vec<Concentration>> {
        match &self.grid {
            None => Ok(momentmp::regression::default_regression_grid()),
            Some(values) => values.iter().map(|v| parse_concentration(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub data: UnivariateSource,
    pub selection: Selection,
    /// Independent generated datasets, seeded `seed, seed + 1, ...`.
    pub datasets: usize,
    /// Selects `c` for logistic regression instead of the univariate model.
    pub regression: Option<RegressionSource>,
    pub scoring: RegressionScoring,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: UnivariateSource::default(),
            selection: Selection::Loocv,
            datasets: 1,
            regression: None,
            scoring: RegressionScoring::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Exact,
    Online,
}

impl From<UpdateMode> for GlmMode {
    fn from(m: UpdateMode) -> Self {
        match m {
            UpdateMode::Exact => GlmMode::Exact,
            UpdateMode::Online => GlmMode::Online,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    ExactDriven,
    OnlineDriven,
}

impl From<Setup> for DivergenceSetup {
    fn from(s: Setup) -> Self {
        match s {
            Setup::ExactDriven => DivergenceSetup::ExactDriven,
            Setup::OnlineDriven => DivergenceSetup::OnlineDriven,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub seed: u64,
    pub replicates: usize,
    /// Defaults to `n_train + 4000`.
    pub horizon: Option<usize>,
    #[serde(flatten)]
    pub data: RegressionSource,
    pub train_fraction: f64,
    pub c: Option<String>,
    pub scoring: RegressionScoring,
    pub mode: UpdateMode,
    /// Training-set rows whose conditional means are reported.
    pub track: Vec<usize>,
    pub path_stride: Option<usize>,
    /// Repeated random splits for the hold-out score table.
    pub splits: usize,
    /// Writes the per-step exact-vs-online coefficient table.
    pub divergence: Option<Setup>,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicates: 1000,
            horizon: None,
            data: RegressionSource::default(),
            train_fraction: 0.5,
            c: None,
            scoring: RegressionScoring::default(),
            mode: UpdateMode::Online,
            track: Vec::new(),
            path_stride: None,
            splits: 0,
            divergence: None,
        }
    }
}

pub fn parse_concentration(s: &str) -> CliResult<Concentration> {
    s.parse().map_err(|e: momentmp::Error| CliError::Config(e.to_string()))
}

/// Reads a config file, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// SHA-256 of the resolved configuration's canonical JSON.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("configs serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

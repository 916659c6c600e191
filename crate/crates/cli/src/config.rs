//! The JSON run configuration shared by every subcommand.
//!
//! Every section is optional and every field has a default, so `{}` is a
//! valid config. Relative paths are resolved against the config file's
//! directory.

use std::path::{Path, PathBuf};

use gradmatch::bench::ood::{DEFAULT_ALPHAS, DEFAULT_TEST_POINTS};
use gradmatch::bench::scoring::DEFAULT_PERCENTILES;
use gradmatch::bench::{BoundCheckConfig, InputDistribution};
use gradmatch::surrogate::DEFAULT_HIDDEN;
use gradmatch::{Activation, SearchConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every named random stream.
    pub seed: u64,
    pub data: DataSection,
    pub train: TrainSection,
    pub search: SearchSection,
    pub bench: BenchSection,
    pub report: ReportSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub oracle: String,
    pub n: usize,
    pub distribution: InputDistribution,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            oracle: "shekel".into(),
            n: 5000,
            distribution: InputDistribution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureSection {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        Self {
            hidden_layers: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::LeakyRelu,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: Option<PathBuf>,
    pub architecture: ArchitectureSection,
    /// `seed` is replaced by the root seed's `train` stream.
    pub options: TrainConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStrategy {
    TopK,
    RandomK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSelection {
    pub strategy: StartStrategy,
    pub count: usize,
}

impl Default for StartSelection {
    fn default() -> Self {
        Self {
            strategy: StartStrategy::TopK,
            count: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Oracle used to score final designs.
    pub oracle: String,
    pub starts: StartSelection,
    pub percentiles: Vec<f64>,
    pub options: SearchConfig,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            model: None,
            dataset: None,
            oracle: "shekel".into(),
            starts: StartSelection::default(),
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            options: SearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub ood: OodSection,
    pub bound: BoundSection,
    pub mnr: MnrSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OodSection {
    pub model: Option<PathBuf>,
    pub oracle: String,
    pub alphas: Vec<f64>,
    pub n_test: usize,
}

impl Default for OodSection {
    fn default() -> Self {
        Self {
            model: None,
            oracle: "shekel".into(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            n_test: DEFAULT_TEST_POINTS,
        }
    }
}

/// The surrogate a bound check compares against the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// The oracle itself.
    Oracle,
    /// A trained model file.
    File { path: PathBuf },
    /// The oracle plus `ε·sin(ωᵀx + θ)`.
    Perturbed {
        epsilon: f64,
        frequency: Vec<f64>,
        phase: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    pub oracle: String,
    pub model: ModelSource,
    /// `seed` is replaced by the root seed's `bench` stream.
    pub options: BoundCheckConfig,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self {
            oracle: "quadratic2d".into(),
            model: ModelSource::Oracle,
            options: BoundCheckConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnrSection {
    pub table: Option<PathBuf>,
    pub algorithm: String,
}

impl Default for MnrSection {
    fn default() -> Self {
        Self {
            table: None,
            algorithm: "MATCH-OPT".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Output directories of earlier commands, summarized in order.
    pub runs: Vec<PathBuf>,
}

impl RunConfig {
    /// Reads `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.train.dataset);
        fix(&mut self.search.model);
        fix(&mut self.search.dataset);
        fix(&mut self.bench.ood.model);
        fix(&mut self.bench.mnr.table);
        if let ModelSource::File { path } = &mut self.bench.bound.model {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        for run in &mut self.report.runs {
            if run.is_relative() {
                *run = base.join(&*run);
            }
        }
    }
}

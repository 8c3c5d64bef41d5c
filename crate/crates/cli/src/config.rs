//! The single TOML file every subcommand reads. Missing sections fall back to
//! defaults; unknown top-level keys are rejected.

use std::path::{Path, PathBuf};

use pairevo::backend::{HttpConfig, SyntheticWorldConfig};
use pairevo::baselines::{DiagnosticOptions, DEFAULT_POINTWISE_VOTES, DEFAULT_REFINE_ROUNDS};
use pairevo::elo::EloConfig;
use pairevo::pipeline::RunConfig;
use pairevo::scaling::RoundPairing;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Synthetic,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub http: HttpConfig,
    /// Also the world that `simulate` draws its judgment matrix from.
    pub synthetic: SyntheticWorldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Pool drawn from the synthetic world when `matrix` is unset.
    pub pool_size: usize,
    /// JSON judgment matrix to use instead of a synthetic pool.
    pub matrix: Option<PathBuf>,
    pub budgets: Vec<u64>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub lambda: f64,
    pub pairing: RoundPairing,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            pool_size: 100,
            matrix: None,
            budgets: vec![40, 80, 120, 200, 400],
            ns: vec![4, 8, 12, 16, 20],
            trials: 500,
            lambda: 0.01,
            pairing: RoundPairing::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    #[default]
    Pointwise,
    SelfRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub method: BaselineMethod,
    pub candidates: usize,
    pub votes: usize,
    pub rounds: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            method: BaselineMethod::Pointwise,
            candidates: 20,
            votes: DEFAULT_POINTWISE_VOTES,
            rounds: DEFAULT_REFINE_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Root seed for every subcommand. Overrides the per-section seeds.
    pub seed: u64,
    /// Not echoed into artifacts: it cannot change results.
    #[serde(skip_serializing)]
    pub parallelism: usize,
    pub backend: BackendSection,
    pub run: RunConfig,
    pub simulate: SimulateSection,
    pub elo: EloConfig<f64>,
    pub diagnose: DiagnosticOptions,
    pub baseline: BaselineSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            parallelism: 8,
            backend: BackendSection::default(),
            run: RunConfig::default(),
            simulate: SimulateSection::default(),
            elo: EloConfig::default(),
            diagnose: DiagnosticOptions::default(),
            baseline: BaselineSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub parallelism: Option<usize>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Failure> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
                toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {}", p.display(), e.message())))?
            }
            None => CliConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(kind) = overrides.backend {
            config.backend.kind = kind;
        }
        if let Some(p) = overrides.parallelism {
            config.parallelism = p;
        }
        config.resolve();
        config.validate()?;
        Ok(config)
    }

    /// Pushes the root seed into every section. Parallelism goes only where
    /// it is not echoed; the diagnostic gets it at call time.
    fn resolve(&mut self) {
        self.run.seed = self.seed;
        self.run.parallelism = self.parallelism;
        self.elo.seed = self.seed;
        self.diagnose.seed = self.seed;
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.parallelism == 0 {
            return Err(Failure::config("parallelism must be >= 1"));
        }
        self.backend.synthetic.validate().map_err(Failure::from_core)?;
        self.run.validate().map_err(Failure::from_core)?;
        self.elo.validate().map_err(Failure::from_core)?;
        let s = &self.simulate;
        if s.trials == 0 || !(s.lambda > 0.0) {
            return Err(Failure::config("simulate needs trials >= 1 and lambda > 0"));
        }
        if s.ns.iter().any(|&n| n < 2) {
            return Err(Failure::config("simulate.ns entries must be >= 2"));
        }
        if self.baseline.candidates == 0 {
            return Err(Failure::config("baseline.candidates must be >= 1"));
        }
        if self.diagnose.pointwise_votes == 0 {
            return Err(Failure::config("diagnose.pointwise_votes must be >= 1"));
        }
        Ok(())
    }
}

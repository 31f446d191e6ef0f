use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::optim::AlgoConfig;
use crate::problems::SynthConfig;
use crate::simnet::{LatencyModel, WorkerSpec};
use crate::{Error, Result};

/// Where the training samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DataSource {
    Synth(SynthConfig),
    /// A LIBSVM-format file; `dim` overrides the inferred feature count.
    Libsvm { path: PathBuf, dim: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    /// L1/L2-regularized logistic regression on +-1 labels.
    Logistic,
    /// One-hidden-layer ReLU network on class labels `0..k`.
    Mlp { hidden: usize, smoothness: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub data: DataSource,
    pub model: ModelKind,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self { data: DataSource::Synth(SynthConfig::default()), model: ModelKind::Logistic, lambda1: 1e-5, lambda2: 1e-4 }
    }
}

/// Everything one experiment needs. Loading materializes every default so
/// reports carry the exact effective configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub algo: AlgoConfig,
    pub workers: Vec<WorkerSpec>,
    /// CSVs and the report go here; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    pub repetitions: usize,
    /// One run seed per repetition.
    pub seeds: Vec<u64>,
    /// Target loss is `P* + target_gap * (P(x0) - P*)`.
    pub target_gap: f64,
    /// Iterations of the full-precision oracle that estimates `P*`.
    pub oracle_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            algo: AlgoConfig::default(),
            workers: vec![WorkerSpec { latency: LatencyModel::Uniform { lo: 1, hi: 4 } }; 4],
            out_dir: None,
            repetitions: 1,
            seeds: vec![0],
            target_gap: 0.1,
            oracle_iters: 20_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        self.algo.validate()?;
        if self.workers.is_empty() {
            return err("at least one worker is required".into());
        }
        for w in &self.workers {
            w.latency.validate()?;
        }
        if self.repetitions == 0 {
            return err("repetitions must be >= 1".into());
        }
        if self.seeds.len() != self.repetitions {
            return err(format!("{} seeds given for {} repetitions", self.seeds.len(), self.repetitions));
        }
        if !(self.target_gap > 0.0 && self.target_gap <= 1.0) {
            return err(format!("target_gap must be in (0, 1], got {}", self.target_gap));
        }
        if self.oracle_iters == 0 {
            return err("oracle_iters must be >= 1".into());
        }
        let p = &self.problem;
        if !(p.lambda1 >= 0.0 && p.lambda2 >= 0.0 && p.lambda1.is_finite() && p.lambda2.is_finite()) {
            return err(format!("regularization must be finite and >= 0, got {} / {}", p.lambda1, p.lambda2));
        }
        match &p.data {
            DataSource::Synth(s) if s.n == 0 || s.d == 0 => return err("synthetic data needs n, d >= 1".into()),
            DataSource::Libsvm { path, .. } if !path.is_file() => {
                return err(format!("dataset {} does not exist", path.display()));
            }
            _ => {}
        }
        if let ModelKind::Mlp { hidden, smoothness } = p.model {
            if hidden == 0 || !(smoothness > 0.0) {
                return err(format!("mlp needs hidden >= 1 and smoothness > 0, got {hidden} / {smoothness}"));
            }
        }
        Ok(())
    }

    /// Same experiment with a different run seed list.
    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.repetitions = seeds.len();
        self.seeds = seeds;
        self
    }
}

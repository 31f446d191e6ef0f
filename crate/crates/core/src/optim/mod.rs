//! AsyLPG, Sparse-AsyLPG, Acc-AsyLPG and their full-precision and
//! gradient-only-quantized baselines, as master/worker step pairs driven by
//! [`crate::simnet`].

mod output;
mod reference;
mod run;
mod steps;
mod theory;

use serde::{Deserialize, Serialize};

use crate::quantizer::{MAX_BITS, MIN_BITS};
use crate::sparsifier::BudgetRule;
use crate::{Error, Result};

pub use output::{select_output, Reservoir};
pub use reference::{reference_prox_svrg, ReferenceTrajectory};
pub use run::{run_algorithm, BroadcastRecord, BroadcastStats, MetricsRow, RunOutput, TraceRow};
pub use steps::{
    acc_master_step, acc_model_broadcast, asylpg_master_step, asylpg_worker_step, model_broadcast, sample_batch,
    sparse_worker_step, Broadcast, ModelPrecision, TrainState,
};
pub use theory::{acc_tau_bound, delta_factor, gamma_factor, max_rho_eq3, theory_constants, AccTheory, TheoryReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "asylpg")]
    AsyLpg,
    #[serde(rename = "sparse_asylpg")]
    SparseAsyLpg,
    #[serde(rename = "acc_asylpg")]
    AccAsyLpg,
    #[serde(rename = "asyfpg")]
    AsyFpg,
    #[serde(rename = "acc_asyfpg")]
    AccAsyFpg,
    #[serde(rename = "qsvrg")]
    Qsvrg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::AsyFpg,
        Algorithm::AccAsyFpg,
        Algorithm::Qsvrg,
        Algorithm::AsyLpg,
        Algorithm::SparseAsyLpg,
        Algorithm::AccAsyLpg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AsyLpg => "asylpg",
            Algorithm::SparseAsyLpg => "sparse_asylpg",
            Algorithm::AccAsyLpg => "acc_asylpg",
            Algorithm::AsyFpg => "asyfpg",
            Algorithm::AccAsyFpg => "acc_asyfpg",
            Algorithm::Qsvrg => "qsvrg",
        }
    }

    pub fn is_accelerated(&self) -> bool {
        matches!(self, Algorithm::AccAsyLpg | Algorithm::AccAsyFpg)
    }

    /// Whether the master quantizes the model it broadcasts.
    pub fn quantizes_model(&self) -> bool {
        matches!(self, Algorithm::AsyLpg | Algorithm::SparseAsyLpg | Algorithm::AccAsyLpg)
    }

    /// Whether workers quantize their gradient differences.
    pub fn quantizes_gradient(&self) -> bool {
        !matches!(self, Algorithm::AsyFpg | Algorithm::AccAsyFpg)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum StepSize {
    /// Constant learning rate; accelerated runs use `lr / theta_s`.
    Experiment { lr: f64 },
    /// `eta = rho / L` (largest admissible `rho` when unset); accelerated runs
    /// use `1 / (sigma L theta_s)`.
    Theory { rho: Option<f64>, sigma: f64 },
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Experiment { lr: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    /// Number of epochs `S`.
    pub epochs: usize,
    /// Inner iterations per epoch `m`.
    pub inner: usize,
    pub step: StepSize,
    /// Model precision `b_x`; with `adaptive_model_bits` it is the floor of the search.
    pub model_bits: u32,
    /// Gradient precision `b`.
    pub grad_bits: u32,
    /// Precision-loss budget for model quantization.
    pub mu: f64,
    /// Raise `b_x` per broadcast until the precision-loss budget holds. When
    /// off, the configured width is always used and violations are only counted.
    pub adaptive_model_bits: bool,
    pub phi: BudgetRule,
    pub tau: usize,
    pub batch: usize,
    pub seed: u64,
    /// Emit a metrics row every this many updates (and at each epoch end).
    pub metric_every: usize,
    /// Keep every model broadcast for later replay.
    pub capture_broadcasts: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AsyLpg,
            epochs: 10,
            inner: 25,
            step: StepSize::default(),
            model_bits: 8,
            grad_bits: 8,
            mu: 0.1,
            adaptive_model_bits: true,
            phi: BudgetRule::Max,
            tau: 4,
            batch: 1,
            seed: 0,
            metric_every: 1,
            capture_broadcasts: false,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.inner == 0 {
            return err("epochs and inner iterations must be >= 1".into());
        }
        if self.batch == 0 || self.metric_every == 0 {
            return err("batch and metric_every must be >= 1".into());
        }
        for (name, b) in [("model_bits", self.model_bits), ("grad_bits", self.grad_bits)] {
            if !(MIN_BITS..=MAX_BITS).contains(&b) {
                return err(format!("{name} must be in {MIN_BITS}..={MAX_BITS}, got {b}"));
            }
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return err(format!("mu must be finite and >= 0, got {}", self.mu));
        }
        match self.step {
            StepSize::Experiment { lr } if !(lr > 0.0 && lr.is_finite()) => err(format!("lr must be positive, got {lr}")),
            StepSize::Theory { rho: Some(r), .. } if !(r > 0.0) => err(format!("rho must be positive, got {r}")),
            StepSize::Theory { sigma, .. } if self.algorithm.is_accelerated() && !(sigma > 1.0) => {
                err(format!("sigma must exceed 1, got {sigma}"))
            }
            _ => Ok(()),
        }
    }

    /// Model width actually used: 32 (full precision) unless the algorithm
    /// quantizes the model.
    pub fn effective_model_bits(&self) -> u32 {
        if self.algorithm.quantizes_model() {
            self.model_bits
        } else {
            MAX_BITS
        }
    }

    pub fn effective_grad_bits(&self) -> u32 {
        if self.algorithm.quantizes_gradient() {
            self.grad_bits
        } else {
            MAX_BITS
        }
    }
}

/// Momentum weight `theta_s = 2 / (s + 2)` for 1-based epoch `s`.
pub fn theta(s: usize) -> f64 {
    2.0 / (s as f64 + 2.0)
}

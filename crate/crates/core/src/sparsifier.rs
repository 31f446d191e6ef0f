//! Unbiased Bernoulli sparsification.
//!
//! Coordinate `i` survives with probability `p_i` and is rescaled to
//! `alpha_i / p_i`. With `p_i = |alpha_i| phi / ||alpha||_1` the second moment
//! `sum alpha_i^2 / p_i` is the smallest achievable for an expected support of
//! `phi` coordinates.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{norm_inf, norm_l1, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparsePlan {
    probs: Vec<f64>,
    budget: f64,
}

impl SparsePlan {
    /// Builds a plan from explicit inclusion probabilities in `[0, 1]`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPlan(format!("probability {p} outside [0, 1]")));
        }
        let budget = probs.iter().sum();
        Ok(Self { probs, budget })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }
}

/// Sparse vector with strictly increasing indices and nonzero values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRealVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseRealVector {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// How a worker picks its sparsity budget for each message.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `phi = ||alpha||_1 / ||alpha||_inf`, the largest budget for which the
    /// optimal plan is valid.
    #[default]
    Max,
    /// A fixed budget, clamped to the valid maximum per message.
    Fixed(f64),
}

impl BudgetRule {
    pub fn resolve(&self, alpha: &[f64]) -> Result<f64> {
        let max = budget_max(alpha)?;
        match *self {
            BudgetRule::Max => Ok(max),
            BudgetRule::Fixed(phi) if phi <= 0.0 || !phi.is_finite() => {
                Err(Error::Config(format!("sparsity budget must be positive, got {phi}")))
            }
            BudgetRule::Fixed(phi) if phi > max => {
                warn!("sparsity budget {phi} clamped to {max}");
                Ok(max)
            }
            BudgetRule::Fixed(phi) => Ok(phi),
        }
    }
}

/// `||alpha||_1 / ||alpha||_inf`.
pub fn budget_max(alpha: &[f64]) -> Result<f64> {
    let inf = norm_inf(alpha);
    if inf == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(norm_l1(alpha) / inf)
}

/// Magnitude-proportional plan `p_i = |alpha_i| phi / ||alpha||_1`.
pub fn optimal_plan(alpha: &[f64], phi: f64) -> Result<SparsePlan> {
    let max = budget_max(alpha)?;
    if !(phi > 0.0) {
        return Err(Error::InvalidPlan(format!("budget must be positive, got {phi}")));
    }
    if phi > max * (1.0 + 1e-12) {
        return Err(Error::BudgetTooLarge { phi, max });
    }
    let l1 = norm_l1(alpha);
    let probs = alpha.iter().map(|a| (a.abs() * phi / l1).min(1.0)).collect();
    Ok(SparsePlan { probs, budget: phi })
}

/// Keeps coordinate `i` with probability `p_i`, rescaled by `1 / p_i`.
pub fn sparsify<R: Rng + ?Sized>(alpha: &[f64], plan: &SparsePlan, rng: &mut R) -> Result<SparseRealVector> {
    if alpha.len() != plan.dim() {
        return Err(Error::DimensionMismatch { expected: plan.dim(), got: alpha.len() });
    }
    let mut entries = Vec::new();
    for (i, (&a, &p)) in alpha.iter().zip(&plan.probs).enumerate() {
        if p == 0.0 || a == 0.0 {
            continue;
        }
        if rng.random::<f64>() < p {
            entries.push((i, a / p));
        }
    }
    Ok(SparseRealVector { dim: alpha.len(), entries })
}

/// `E||beta||^2 = sum_i alpha_i^2 / p_i` over coordinates with `alpha_i != 0`.
pub fn second_moment_expected(alpha: &[f64], plan: &SparsePlan) -> f64 {
    alpha
        .iter()
        .zip(&plan.probs)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, p)| a * a / p)
        .sum()
}

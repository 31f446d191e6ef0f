use serde::Serialize;

use super::{theta, AlgoConfig, Algorithm, StepSize};
use crate::quantizer::levels;
use crate::sparsifier::BudgetRule;

/// Gradient-quantization variance factor `d / (4 (2^(b-1) - 1)^2)`.
pub fn delta_factor(d: usize, b: u32) -> f64 {
    let l = levels(b);
    d as f64 / (4.0 * l * l)
}

/// Sparsified-and-quantized variance factor
/// `d^2 / (4 phi (2^(b-1) - 1)^2) + d / phi + 1`.
pub fn gamma_factor(d: usize, b: u32, phi: f64) -> f64 {
    let l = levels(b);
    let d = d as f64;
    d * d / (4.0 * phi * l * l) + d / phi + 1.0
}

/// Left side of the step-size/delay condition with variance factor `v`:
/// `8 rho^2 m^2 (mu+1) v + 2 rho^2 (mu+1) v tau^2 + rho`.
fn condition_lhs(rho: f64, m: usize, tau: usize, mu: f64, v: f64) -> f64 {
    let (m, tau) = (m as f64, tau as f64);
    8.0 * rho * rho * m * m * (mu + 1.0) * v + 2.0 * rho * rho * (mu + 1.0) * v * tau * tau + rho
}

/// Largest `rho` with `condition_lhs <= 1` for variance factor `v`.
fn max_rho(m: usize, tau: usize, mu: f64, v: f64) -> f64 {
    let (mf, tf) = (m as f64, tau as f64);
    let a = (mu + 1.0) * v * (8.0 * mf * mf + 2.0 * tf * tf);
    (-1.0 + (1.0 + 4.0 * a).sqrt()) / (2.0 * a)
}

/// Largest `rho` meeting the dense double-quantization condition.
pub fn max_rho_eq3(m: usize, tau: usize, mu: f64, d: usize, b: u32) -> f64 {
    max_rho(m, tau, mu, delta_factor(d, b) + 2.0)
}

/// Sparsity budget used for worst-case constants: the fixed budget, or 1
/// (the smallest possible) under the max rule.
fn phi_for_bounds(rule: &BudgetRule) -> f64 {
    match rule {
        BudgetRule::Fixed(p) => *p,
        BudgetRule::Max => 1.0,
    }
}

pub(crate) fn default_rho(cfg: &AlgoConfig, d: usize) -> f64 {
    let b = cfg.effective_grad_bits();
    let mu = if cfg.algorithm.quantizes_model() { cfg.mu } else { 0.0 };
    if cfg.algorithm == Algorithm::SparseAsyLpg {
        max_rho(cfg.inner, cfg.tau, mu, gamma_factor(d, b, phi_for_bounds(&cfg.phi)))
    } else {
        max_rho(cfg.inner, cfg.tau, mu, delta_factor(d, b) + 2.0)
    }
}

/// Delay bound of the accelerated method at momentum weight `theta`.
pub fn acc_tau_bound(d: usize, b: u32, mu: f64, sigma: f64, theta: f64) -> f64 {
    let l = levels(b);
    let delta = d as f64 / (l * l) + 2.0;
    let gamma = 1.0 + 2.0 * theta * mu;
    let c = 2.0 / (gamma * theta) + theta * delta;
    ((c * c + 4.0 * (sigma - 1.0) / gamma).sqrt() - c) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccTheory {
    pub sigma: f64,
    /// Delay bound for each epoch `s = 1..=S`.
    pub tau_bounds: Vec<f64>,
    /// Epoch whose bound is smallest.
    pub binding_epoch: usize,
    pub tau_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryReport {
    pub d: usize,
    pub smoothness: f64,
    pub inner: usize,
    pub tau: usize,
    pub mu: f64,
    pub grad_bits: u32,
    /// `rho = eta L` for plain runs.
    pub rho: Option<f64>,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub eq3_lhs: Option<f64>,
    pub eq3_holds: Option<bool>,
    pub eq6_lhs: Option<f64>,
    pub eq6_holds: Option<bool>,
    /// Full-precision synchronous condition `4 rho^2 m^2 + rho`, for comparison.
    pub sync_lhs: Option<f64>,
    pub sync_holds: Option<bool>,
    /// `rho < 1/2`, where the rate bound is defined.
    pub in_rate_regime: Option<bool>,
    /// `2 L (P(x0) - P*) / (rho (1 - 2 rho) T)` when a gap is supplied.
    pub rate_bound: Option<f64>,
    pub acc: Option<AccTheory>,
}

/// Evaluates the convergence constants and conditions for `cfg` on a problem
/// of dimension `d` and smoothness `l`. `gap` is `P(x0) - P*` if known.
pub fn theory_constants(cfg: &AlgoConfig, d: usize, l: f64, gap: Option<f64>) -> TheoryReport {
    let b = cfg.effective_grad_bits();
    let mu = if cfg.algorithm.quantizes_model() { cfg.mu } else { 0.0 };
    let delta = delta_factor(d, b);
    let gamma = (cfg.algorithm == Algorithm::SparseAsyLpg).then(|| gamma_factor(d, b, phi_for_bounds(&cfg.phi)));
    let mut report = TheoryReport {
        d,
        smoothness: l,
        inner: cfg.inner,
        tau: cfg.tau,
        mu,
        grad_bits: b,
        rho: None,
        delta,
        gamma,
        eq3_lhs: None,
        eq3_holds: None,
        eq6_lhs: None,
        eq6_holds: None,
        sync_lhs: None,
        sync_holds: None,
        in_rate_regime: None,
        rate_bound: None,
        acc: None,
    };
    if cfg.algorithm.is_accelerated() {
        let sigma = match cfg.step {
            StepSize::Theory { sigma, .. } => sigma,
            StepSize::Experiment { .. } => f64::NAN,
        };
        let bounds: Vec<f64> = (1..=cfg.epochs).map(|s| acc_tau_bound(d, b, mu, sigma, theta(s))).collect();
        let binding = bounds.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(1, |(i, _)| i + 1);
        let tau_ok = bounds.iter().all(|bd| cfg.tau as f64 <= *bd);
        report.acc = Some(AccTheory { sigma, tau_bounds: bounds, binding_epoch: binding, tau_ok });
        return report;
    }
    let rho = match cfg.step {
        StepSize::Experiment { lr } => lr * l,
        StepSize::Theory { rho: Some(r), .. } => r,
        StepSize::Theory { rho: None, .. } => default_rho(cfg, d),
    };
    report.rho = Some(rho);
    let eq3 = condition_lhs(rho, cfg.inner, cfg.tau, mu, delta + 2.0);
    report.eq3_lhs = Some(eq3);
    report.eq3_holds = Some(eq3 <= 1.0 + 1e-12);
    if let Some(g) = gamma {
        let eq6 = condition_lhs(rho, cfg.inner, cfg.tau, mu, g);
        report.eq6_lhs = Some(eq6);
        report.eq6_holds = Some(eq6 <= 1.0 + 1e-12);
    }
    let m = cfg.inner as f64;
    let sync = 4.0 * rho * rho * m * m + rho;
    report.sync_lhs = Some(sync);
    report.sync_holds = Some(sync <= 1.0);
    report.in_rate_regime = Some(rho < 0.5);
    if let Some(gap) = gap {
        if rho < 0.5 {
            let t = (cfg.epochs * cfg.inner) as f64;
            report.rate_bound = Some(2.0 * l * gap / (rho * (1.0 - 2.0 * rho) * t));
        }
    }
    report
}

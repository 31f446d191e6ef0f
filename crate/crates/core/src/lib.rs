//! Double quantization for communication-efficient asynchronous distributed
//! optimization.
//!
//! The crate bundles the pieces needed to run low-precision, variance-reduced
//! proximal methods over a simulated parameter server:
//!
//! - [`quantizer`]: stochastic-rounding quantization onto a `(delta, bits)` grid,
//!   its exact expected error, and the model-precision search.
//! - [`sparsifier`]: unbiased Bernoulli coordinate dropping with
//!   magnitude-proportional inclusion probabilities.
//! - [`codec`]: bit-exact message encodings and the transmitted-bit ledger.
//! - [`problems`]: composite objectives (logistic regression, a small MLP,
//!   quadratics), proximal operators, datasets.
//! - [`simnet`]: a deterministic bounded-staleness master/worker simulator.
//! - [`optim`]: AsyLPG, Sparse-AsyLPG, Acc-AsyLPG and their baselines.
//! - [`harness`]: experiment configuration, orchestration and CSV/JSON output.

pub mod codec;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod quantizer;
pub mod rng;
pub mod simnet;
pub mod sparsifier;

pub use error::{Error, Result};

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn norm_l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

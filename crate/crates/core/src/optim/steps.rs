use log::warn;
use rand::Rng;

use crate::codec::{decode, encode_dense, encode_flag, encode_full_lossless, encode_sparse, Decoded, WireMessage};
use crate::problems::CompositeProblem;
use crate::quantizer::{
    expected_sq_error, quantize_for_wire, quantize_sparse, quantize_with_grid, search_bits, QuantGrid,
    SparseLowPrecisionVector, MAX_BITS,
};
use crate::sparsifier::{optimal_plan, sparsify, BudgetRule};
use crate::{dist_sq, Error, Result};

/// Optimizer state owned by the master.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// 1-based epoch index (0 before the first epoch).
    pub epoch: usize,
    /// Updates applied in the current epoch.
    pub t: usize,
    pub x: Vec<f64>,
    pub snapshot: Vec<f64>,
    pub snapshot_grad: Vec<f64>,
    /// Auxiliary iterate of accelerated runs.
    pub y: Option<Vec<f64>>,
    pub eta: f64,
    pub theta: Option<f64>,
    /// Running sum of `x_{t+1}` over the epoch, for the averaged snapshot.
    pub x_sum: Option<Vec<f64>>,
}

impl TrainState {
    pub fn new(x0: Vec<f64>, eta: f64) -> Self {
        let d = x0.len();
        Self {
            epoch: 0,
            t: 0,
            snapshot: x0.clone(),
            x: x0,
            snapshot_grad: vec![0.0; d],
            y: None,
            eta,
            theta: None,
            x_sum: None,
        }
    }

    pub fn new_accelerated(x0: Vec<f64>) -> Self {
        let mut s = Self::new(x0.clone(), 0.0);
        s.y = Some(x0);
        s
    }

    /// Plain epoch start: `x_0 = snapshot`.
    pub fn begin_epoch(&mut self, snapshot_grad: Vec<f64>) {
        self.epoch += 1;
        self.t = 0;
        self.x.clone_from(&self.snapshot);
        self.snapshot_grad = snapshot_grad;
    }

    /// Accelerated epoch start: keep `y_0` from the previous epoch, then couple
    /// `x_0 = theta y_0 + (1 - theta) snapshot`.
    pub fn begin_acc_epoch(&mut self, theta: f64, eta: f64, snapshot_grad: Vec<f64>) {
        self.epoch += 1;
        self.t = 0;
        self.theta = Some(theta);
        self.eta = eta;
        let y = self.y.as_ref().expect("accelerated state has y");
        self.x = y.iter().zip(&self.snapshot).map(|(yi, si)| theta * yi + (1.0 - theta) * si).collect();
        self.snapshot_grad = snapshot_grad;
        self.x_sum = Some(vec![0.0; self.x.len()]);
    }

    /// Accelerated epoch end: the snapshot becomes the average of `x_1..x_m`.
    pub fn end_acc_epoch(&mut self) {
        let sum = self.x_sum.take().expect("accelerated epoch in progress");
        let inv = 1.0 / self.t as f64;
        self.snapshot = sum.iter().map(|v| v * inv).collect();
    }

    pub fn end_epoch(&mut self) {
        self.snapshot.clone_from(&self.x);
    }
}

/// Model-broadcast precision settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelPrecision {
    /// `b_x`; 32 means full precision.
    pub bits: u32,
    pub mu: f64,
    /// Escalate the width per broadcast until the budget holds.
    pub adaptive: bool,
}

/// A model message plus what it took to produce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Broadcast {
    pub msg: WireMessage,
    /// Width sent; `None` for the snapshot flag.
    pub bits_used: Option<u32>,
    /// `E||Q(x) - x||^2 / ||x - snapshot||^2` on the configured-width grid;
    /// `None` for the flag and for full-precision configurations.
    pub mu_required: Option<f64>,
    /// Whether the precision-loss budget holds for what was sent.
    pub satisfied: bool,
}

fn wire_grid(v: &[f64], bits: u32) -> Result<QuantGrid> {
    Ok(QuantGrid::for_vector(v, bits)?.binary32_safe())
}

/// Quantizes `x` for broadcast under `E||Q(x) - x||^2 <= mu ||x - snapshot||^2`.
///
/// Sends the one-bit snapshot flag when `x == snapshot`. With
/// `adaptive`, a width that breaks the budget is raised to the smallest one
/// that meets it, falling back to full precision.
pub fn model_broadcast<R: Rng + ?Sized>(x: &[f64], snapshot: &[f64], prec: &ModelPrecision, rng: &mut R) -> Result<Broadcast> {
    broadcast_scaled(x, snapshot, prec, 1.0, rng)
}

/// Accelerated variant: the budget is scaled by the momentum weight `theta`.
pub fn acc_model_broadcast<R: Rng + ?Sized>(
    x: &[f64],
    snapshot: &[f64],
    theta: f64,
    prec: &ModelPrecision,
    rng: &mut R,
) -> Result<Broadcast> {
    broadcast_scaled(x, snapshot, prec, theta, rng)
}

fn broadcast_scaled<R: Rng + ?Sized>(x: &[f64], snapshot: &[f64], prec: &ModelPrecision, scale: f64, rng: &mut R) -> Result<Broadcast> {
    if x.len() != snapshot.len() {
        return Err(Error::DimensionMismatch { expected: snapshot.len(), got: x.len() });
    }
    if x == snapshot {
        return Ok(Broadcast { msg: encode_flag(), bits_used: None, mu_required: None, satisfied: true });
    }
    let full = |mu_required| Broadcast { msg: encode_full_lossless(x), bits_used: Some(MAX_BITS), mu_required, satisfied: true };
    if prec.bits >= MAX_BITS {
        return Ok(full(None));
    }
    let gap = dist_sq(x, snapshot);
    let rhs = scale * prec.mu * gap;
    let base = wire_grid(x, prec.bits)?;
    let err = expected_sq_error(x, &base)?;
    let mu_required = Some(err / gap);
    let (grid, satisfied) = if err <= rhs {
        (base, true)
    } else if prec.adaptive {
        if prec.bits + 1 >= MAX_BITS {
            return Ok(full(mu_required));
        }
        let choice = search_bits(x, snapshot, scale * prec.mu, prec.bits + 1, MAX_BITS - 1, wire_grid)?;
        if !choice.satisfied {
            return Ok(full(mu_required));
        }
        (choice.grid, true)
    } else {
        warn!("model quantization at {} bits needs mu {:.3e}, budget {:.3e}", prec.bits, err / gap, scale * prec.mu);
        (base, false)
    };
    let q = quantize_with_grid(x, grid, rng)?;
    Ok(Broadcast { msg: encode_dense(&q)?, bits_used: Some(grid.bits()), mu_required, satisfied })
}

/// `batch` indices drawn uniformly with replacement from `0..n`.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Vec<usize> {
    (0..batch).map(|_| rng.random_range(0..n)).collect()
}

/// Gradient difference on the received model, quantized densely at `b` bits
/// (sent in full precision when `b = 32`).
pub fn asylpg_worker_step<R: Rng + ?Sized>(
    problem: &dyn CompositeProblem,
    model: &[f64],
    snapshot: &[f64],
    batch: &[usize],
    b: u32,
    rng: &mut R,
) -> Result<WireMessage> {
    let alpha = problem.batch_grad_diff(batch, model, snapshot);
    if b >= MAX_BITS {
        return Ok(encode_full_lossless(&alpha));
    }
    encode_dense(&quantize_for_wire(&alpha, b, rng)?)
}

/// Gradient difference sparsified with the magnitude-proportional plan, then
/// the survivors quantized at `b` bits. A zero difference sends an empty message.
pub fn sparse_worker_step<R: Rng + ?Sized>(
    problem: &dyn CompositeProblem,
    model: &[f64],
    snapshot: &[f64],
    batch: &[usize],
    phi: &BudgetRule,
    b: u32,
    rng: &mut R,
) -> Result<WireMessage> {
    let alpha = problem.batch_grad_diff(batch, model, snapshot);
    let dim = alpha.len();
    let empty = || -> Result<WireMessage> {
        encode_sparse(&SparseLowPrecisionVector { grid: QuantGrid::new(0.0, b)?, dim, entries: Vec::new() })
    };
    if alpha.iter().all(|a| *a == 0.0) {
        return empty();
    }
    let plan = optimal_plan(&alpha, phi.resolve(&alpha)?)?;
    let beta = sparsify(&alpha, &plan, rng)?;
    if beta.nnz() == 0 {
        return empty();
    }
    encode_sparse(&quantize_sparse(&beta, b, rng)?)
}

fn decode_gradient(msg: &WireMessage, dim: usize) -> Result<Vec<f64>> {
    match decode(msg, dim)? {
        Decoded::SnapshotFlag => Err(Error::Codec("workers never send the snapshot flag".into())),
        other => Ok(other.into_vector(&[])),
    }
}

fn semi_stochastic(state: &TrainState, msg: &WireMessage) -> Result<Vec<f64>> {
    let mut u = decode_gradient(msg, state.x.len())?;
    u.iter_mut().zip(&state.snapshot_grad).for_each(|(a, g)| *a += g);
    Ok(u)
}

/// `x <- prox_{eta h}(x - eta u)` with `u = decoded gradient + snapshot gradient`.
pub fn asylpg_master_step(problem: &dyn CompositeProblem, state: &mut TrainState, msg: &WireMessage) -> Result<()> {
    let u = semi_stochastic(state, msg)?;
    let eta = state.eta;
    let v: Vec<f64> = state.x.iter().zip(&u).map(|(x, g)| x - eta * g).collect();
    state.x = problem.prox(eta, &v);
    state.t += 1;
    Ok(())
}

/// `y <- prox_{eta h}(y - eta u)`, then `x = snapshot + theta (y - snapshot)`.
pub fn acc_master_step(problem: &dyn CompositeProblem, state: &mut TrainState, msg: &WireMessage) -> Result<()> {
    let u = semi_stochastic(state, msg)?;
    let eta = state.eta;
    let theta = state.theta.ok_or_else(|| Error::Simulation("accelerated step outside an epoch".into()))?;
    let y = state.y.as_mut().ok_or_else(|| Error::Simulation("accelerated step without y".into()))?;
    let v: Vec<f64> = y.iter().zip(&u).map(|(yi, g)| yi - eta * g).collect();
    *y = problem.prox(eta, &v);
    state.x = state.snapshot.iter().zip(y.iter()).map(|(s, yi)| s + theta * (yi - s)).collect();
    if let Some(sum) = state.x_sum.as_mut() {
        sum.iter_mut().zip(&state.x).for_each(|(a, x)| *a += x);
    }
    state.t += 1;
    Ok(())
}

use std::collections::BTreeMap;

use serde::Serialize;

use super::steps::{
    acc_master_step, acc_model_broadcast, asylpg_master_step, asylpg_worker_step, model_broadcast, sample_batch,
    sparse_worker_step, Broadcast, ModelPrecision, TrainState,
};
use super::{theory, theta, AlgoConfig, Algorithm, Reservoir, StepSize};
use crate::codec::{decode, index_width, BitLedger, Direction, MessageKind, WireMessage};
use crate::problems::{gradient_mapping_norm, CompositeProblem};
use crate::rng::{stream, Stream, StreamId};
use crate::simnet::{epoch_barrier, MasterNode, Simnet, StalenessRecord, WorkerNode, WorkerSpec};
use crate::{Error, Result};

/// One row of the per-iteration metrics table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub epoch: usize,
    /// Updates applied so far in this epoch.
    pub t: usize,
    /// Version the last applied gradient was computed on.
    pub d_t: Option<usize>,
    pub train_loss: f64,
    pub grad_mapping_sq: f64,
    pub cumulative_bits: u64,
    pub mu_required: Option<f64>,
    pub b_x_used: Option<u32>,
    pub nnz_sent: Option<usize>,
}

/// One applied update, for the staleness trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub d_t: usize,
    pub worker_id: usize,
    pub epoch: usize,
    pub message_kind: &'static str,
    pub bits: u64,
}

/// A captured model broadcast, for replaying the precision search offline.
#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastRecord {
    pub epoch: usize,
    /// Iterate version that was broadcast.
    pub version: usize,
    pub x: Vec<f64>,
    pub mu_required: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BroadcastStats {
    pub count: u64,
    pub flags: u64,
    /// Broadcasts sent at a width above the configured one (adaptive mode).
    pub escalations: u64,
    /// Broadcasts that broke the precision-loss budget (fixed-width mode).
    pub violations: u64,
    pub max_mu_required: f64,
    /// Count of broadcasts per width sent.
    pub width_histogram: BTreeMap<u32, u64>,
}

impl BroadcastStats {
    fn observe(&mut self, b: &Broadcast, configured: u32) {
        self.count += 1;
        match b.bits_used {
            None => self.flags += 1,
            Some(w) => {
                *self.width_histogram.entry(w).or_default() += 1;
                if w > configured {
                    self.escalations += 1;
                }
            }
        }
        if !b.satisfied {
            self.violations += 1;
        }
        if let Some(mu) = b.mu_required {
            self.max_mu_required = self.max_mu_required.max(mu);
        }
    }

    /// Mean width over non-flag broadcasts.
    pub fn mean_width(&self) -> f64 {
        let n: u64 = self.width_histogram.values().sum();
        if n == 0 {
            return 0.0;
        }
        self.width_histogram.iter().map(|(w, c)| *w as f64 * *c as f64).sum::<f64>() / n as f64
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub config: AlgoConfig,
    pub metrics: Vec<MetricsRow>,
    pub trace: Vec<TraceRow>,
    pub records: Vec<StalenessRecord>,
    pub ledger: BitLedger,
    /// Last master iterate.
    pub final_x: Vec<f64>,
    /// The algorithm's declared output: a uniform draw over inner iterates, or
    /// the last snapshot for accelerated runs.
    pub output_x: Vec<f64>,
    /// Snapshot at the end of each epoch (index 0 is the starting point).
    pub snapshots: Vec<Vec<f64>>,
    pub broadcasts: Vec<BroadcastRecord>,
    pub stats: BroadcastStats,
    /// Step size used by the gradient-mapping metric.
    pub metric_eta: f64,
}

impl RunOutput {
    pub fn final_loss(&self) -> f64 {
        self.metrics.last().map_or(f64::NAN, |r| r.train_loss)
    }

    /// Loss of the last metrics row of each epoch, indexed by epoch - 1.
    pub fn epoch_losses(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in self.metrics.iter().filter(|r| r.epoch > 0) {
            if out.len() < r.epoch {
                out.push(r.train_loss);
            } else {
                out[r.epoch - 1] = r.train_loss;
            }
        }
        out
    }
}

struct Task {
    msg: WireMessage,
    mu_required: Option<f64>,
    bits_used: Option<u32>,
}

struct Reply {
    msg: WireMessage,
    nnz: usize,
    mu_required: Option<f64>,
    bits_used: Option<u32>,
}

struct Sinks {
    ledger: BitLedger,
    metrics: Vec<MetricsRow>,
    trace: Vec<TraceRow>,
    broadcasts: Vec<BroadcastRecord>,
    stats: BroadcastStats,
    reservoir: Reservoir,
}

struct Master<'a> {
    problem: &'a dyn CompositeProblem,
    cfg: &'a AlgoConfig,
    prec: ModelPrecision,
    state: &'a mut TrainState,
    sinks: &'a mut Sinks,
    rng: &'a mut Stream,
    step_base: u64,
    metric_eta: f64,
}

impl Master<'_> {
    fn metrics_row(&self, d_t: Option<usize>, reply: Option<&Reply>) -> MetricsRow {
        let x = &self.state.x;
        MetricsRow {
            epoch: self.state.epoch,
            t: self.state.t,
            d_t,
            train_loss: self.problem.value(x),
            grad_mapping_sq: gradient_mapping_norm(self.problem, x, self.metric_eta),
            cumulative_bits: self.sinks.ledger.total_bits(),
            mu_required: reply.and_then(|r| r.mu_required),
            b_x_used: reply.and_then(|r| r.bits_used),
            nnz_sent: reply.map(|r| r.nnz),
        }
    }
}

impl MasterNode for Master<'_> {
    type Task = Task;
    type Reply = Reply;

    fn dispatch(&mut self, _worker: usize, version: usize) -> Result<Task> {
        let st = &self.state;
        let b = match st.theta {
            Some(th) if self.cfg.algorithm.is_accelerated() => acc_model_broadcast(&st.x, &st.snapshot, th, &self.prec, self.rng)?,
            _ => model_broadcast(&st.x, &st.snapshot, &self.prec, self.rng)?,
        };
        self.sinks.stats.observe(&b, self.prec.bits);
        if self.cfg.capture_broadcasts {
            self.sinks.broadcasts.push(BroadcastRecord { epoch: st.epoch, version, x: st.x.clone(), mu_required: b.mu_required });
        }
        self.sinks.ledger.record(self.step_base + version as u64, &b.msg, Direction::Down);
        Ok(Task { msg: b.msg, mu_required: b.mu_required, bits_used: b.bits_used })
    }

    fn apply(&mut self, rec: StalenessRecord, reply: Reply) -> Result<()> {
        self.sinks.ledger.record(self.step_base + rec.t as u64, &reply.msg, Direction::Up);
        if !self.cfg.algorithm.is_accelerated() {
            self.sinks.reservoir.push(&self.state.x);
        }
        if self.cfg.algorithm.is_accelerated() {
            acc_master_step(self.problem, self.state, &reply.msg)?;
        } else {
            asylpg_master_step(self.problem, self.state, &reply.msg)?;
        }
        if self.state.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch: self.state.epoch, t: rec.t });
        }
        self.sinks.trace.push(TraceRow {
            t: rec.t,
            d_t: rec.version,
            worker_id: rec.worker,
            epoch: rec.epoch,
            message_kind: reply.msg.kind().as_str(),
            bits: reply.msg.bits(),
        });
        let done = self.state.t;
        if done.is_multiple_of(self.cfg.metric_every) || done == self.cfg.inner {
            let row = self.metrics_row(Some(rec.version), Some(&reply));
            if !row.train_loss.is_finite() {
                return Err(Error::Diverged { epoch: self.state.epoch, t: rec.t });
            }
            self.sinks.metrics.push(row);
        }
        Ok(())
    }

    fn discard(&mut self, _worker: usize, reply: Reply) -> Result<()> {
        self.sinks.ledger.record(self.step_base + self.cfg.inner as u64, &reply.msg, Direction::Up);
        Ok(())
    }
}

struct Worker<'a> {
    problem: &'a dyn CompositeProblem,
    cfg: &'a AlgoConfig,
    snapshot: Vec<f64>,
    grad_bits: u32,
}

impl WorkerNode<Task, Reply> for Worker<'_> {
    fn work(&self, _worker: usize, task: Task, rng: &mut Stream) -> Result<Reply> {
        let d = self.snapshot.len();
        let model = decode(&task.msg, d)?.into_vector(&self.snapshot);
        let batch = sample_batch(self.problem.num_samples(), self.cfg.batch, rng);
        let (msg, nnz) = if self.cfg.algorithm == Algorithm::SparseAsyLpg {
            let msg = sparse_worker_step(self.problem, &model, &self.snapshot, &batch, &self.cfg.phi, self.grad_bits, rng)?;
            let per_entry = (index_width(d) + self.grad_bits) as u64;
            let nnz = ((msg.bits() - 32) / per_entry) as usize;
            (msg, nnz)
        } else {
            (asylpg_worker_step(self.problem, &model, &self.snapshot, &batch, self.grad_bits, rng)?, d)
        };
        debug_assert_ne!(msg.kind(), MessageKind::SnapshotFlag);
        Ok(Reply { msg, nnz, mu_required: task.mu_required, bits_used: task.bits_used })
    }
}

/// Runs `cfg.epochs` epochs of the configured algorithm from `x0` over the
/// simulated workers.
pub fn run_algorithm(problem: &dyn CompositeProblem, cfg: &AlgoConfig, workers: &[WorkerSpec], x0: &[f64]) -> Result<RunOutput> {
    cfg.validate()?;
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    let l = problem.smoothness();
    let acc = cfg.algorithm.is_accelerated();
    // Base step: eta for plain runs, theta_s * eta_s for accelerated ones.
    let base_eta = match cfg.step {
        StepSize::Experiment { lr } => lr,
        StepSize::Theory { sigma, .. } if acc => 1.0 / (sigma * l),
        StepSize::Theory { rho: Some(rho), .. } => rho / l,
        StepSize::Theory { rho: None, .. } => theory::default_rho(cfg, d) / l,
    };
    let prec = ModelPrecision { bits: cfg.effective_model_bits(), mu: cfg.mu, adaptive: cfg.adaptive_model_bits };
    let grad_bits = cfg.effective_grad_bits();
    let mut net = Simnet::new(workers.to_vec(), cfg.tau, cfg.seed)?;
    let mut master_rng = stream(cfg.seed, StreamId::Master);
    let mut state = if acc { TrainState::new_accelerated(x0.to_vec()) } else { TrainState::new(x0.to_vec(), base_eta) };
    let mut sinks = Sinks {
        ledger: BitLedger::new(),
        metrics: Vec::new(),
        trace: Vec::new(),
        broadcasts: Vec::new(),
        stats: BroadcastStats::default(),
        reservoir: Reservoir::new(stream(cfg.seed, StreamId::Output)),
    };
    let mut records = Vec::with_capacity(cfg.epochs * cfg.inner);
    let mut snapshots = vec![x0.to_vec()];
    {
        let m = Master {
            problem,
            cfg,
            prec,
            state: &mut state,
            sinks: &mut sinks,
            rng: &mut master_rng,
            step_base: 0,
            metric_eta: base_eta,
        };
        let row = m.metrics_row(None, None);
        sinks.metrics.push(row);
    }
    for s in 1..=cfg.epochs {
        let step_base = ((s - 1) * cfg.inner) as u64;
        let g = epoch_barrier(problem, &state.snapshot, net.num_workers(), &mut sinks.ledger, step_base);
        if acc {
            let th = theta(s);
            state.begin_acc_epoch(th, base_eta / th, g);
        } else {
            state.begin_epoch(g);
        }
        let worker = Worker { problem, cfg, snapshot: state.snapshot.clone(), grad_bits };
        let mut master = Master {
            problem,
            cfg,
            prec,
            state: &mut state,
            sinks: &mut sinks,
            rng: &mut master_rng,
            step_base,
            metric_eta: base_eta,
        };
        records.extend(net.run_inner_loop(s, cfg.inner, &mut master, &worker)?);
        if acc {
            state.end_acc_epoch();
        } else {
            state.end_epoch();
        }
        snapshots.push(state.snapshot.clone());
    }
    let output_x = if acc {
        state.snapshot.clone()
    } else {
        sinks.reservoir.chosen().map(<[f64]>::to_vec).unwrap_or_else(|| state.x.clone())
    };
    Ok(RunOutput {
        config: cfg.clone(),
        metrics: sinks.metrics,
        trace: sinks.trace,
        records,
        ledger: sinks.ledger,
        final_x: state.x,
        output_x,
        snapshots,
        broadcasts: sinks.broadcasts,
        stats: sinks.stats,
        metric_eta: base_eta,
    })
}

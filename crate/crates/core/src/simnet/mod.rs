//! Deterministic bounded-staleness master/worker simulator.
//!
//! Time is measured in integer ticks. A worker handed a task at version `v`
//! finishes after its sampled latency; the master applies finished results one
//! update at a time. A result is only applied if doing so keeps every
//! outstanding task able to land within the staleness cap `tau`; otherwise it
//! is held (the worker stalls) until that becomes true. Dispatch is gated so
//! that at most `tau + 1` tasks are ever outstanding, which keeps the held set
//! schedulable and rules out deadlock.

mod barrier;
mod scheduler;
pub mod threaded;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream, StreamId};
use crate::{Error, Result};

pub use barrier::{epoch_barrier, partition};
use scheduler::Scheduler;

/// Latency in ticks, always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum LatencyModel {
    Fixed { ticks: u64 },
    /// Uniform on `lo..=hi`.
    Uniform { lo: u64, hi: u64 },
    /// `1 + Geometric(p)` failures before the first success.
    Geometric { p: f64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Fixed { ticks: 1 }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LatencyModel::Fixed { ticks } if ticks >= 1 => Ok(()),
            LatencyModel::Uniform { lo, hi } if lo >= 1 && hi >= lo => Ok(()),
            LatencyModel::Geometric { p } if p > 0.0 && p <= 1.0 => Ok(()),
            other => Err(Error::Config(format!("invalid latency model {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            LatencyModel::Fixed { ticks } => ticks,
            LatencyModel::Uniform { lo, hi } => rng.random_range(lo..=hi),
            LatencyModel::Geometric { p } => {
                if p >= 1.0 {
                    return 1;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / (1.0 - p).ln()).floor() as u64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub latency: LatencyModel,
}

/// One applied update: master step `t` used a result computed on version `version`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StalenessRecord {
    pub epoch: usize,
    pub t: usize,
    pub version: usize,
    pub worker: usize,
}

impl StalenessRecord {
    pub fn staleness(&self) -> usize {
        self.t - self.version
    }
}

/// Master side of an inner loop.
pub trait MasterNode {
    type Task;
    type Reply;

    /// Builds the downlink message for `worker`, reading the iterate at `version`.
    fn dispatch(&mut self, worker: usize, version: usize) -> Result<Self::Task>;

    /// Applies a result as update `record.t`.
    fn apply(&mut self, record: StalenessRecord, reply: Self::Reply) -> Result<()>;

    /// Drops a result that was still outstanding when the epoch ended.
    fn discard(&mut self, worker: usize, reply: Self::Reply) -> Result<()>;
}

/// Worker side: a pure function of the task and the worker's own stream.
pub trait WorkerNode<T, R>: Sync {
    fn work(&self, worker: usize, task: T, rng: &mut Stream) -> Result<R>;
}

/// Simulator state that persists across epochs.
#[derive(Debug)]
pub struct Simnet {
    specs: Vec<WorkerSpec>,
    tau: usize,
    latency_rngs: Vec<Stream>,
    worker_rngs: Vec<Stream>,
    clock: u64,
    seq: u64,
}

impl Simnet {
    pub fn new(specs: Vec<WorkerSpec>, tau: usize, seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("need at least one worker".into()));
        }
        for s in &specs {
            s.latency.validate()?;
        }
        let latency_rngs = (0..specs.len()).map(|i| stream(seed, StreamId::Latency(i))).collect();
        let worker_rngs = (0..specs.len()).map(|i| stream(seed, StreamId::Worker(i))).collect();
        Ok(Self { specs, tau, latency_rngs, worker_rngs, clock: 0, seq: 0 })
    }

    pub fn num_workers(&self) -> usize {
        self.specs.len()
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Mutable access to a worker's stream, for callers that need worker-side
    /// draws outside an inner loop.
    pub fn worker_rng(&mut self, worker: usize) -> &mut Stream {
        &mut self.worker_rngs[worker]
    }

    /// Runs exactly `m` master updates and returns their staleness records.
    ///
    /// Results still outstanding after the `m`-th update are computed and
    /// handed to [`MasterNode::discard`] in dispatch order.
    pub fn run_inner_loop<M, W>(&mut self, epoch: usize, m: usize, master: &mut M, worker: &W) -> Result<Vec<StalenessRecord>>
    where
        M: MasterNode,
        W: WorkerNode<M::Task, M::Reply>,
    {
        if m == 0 {
            return Err(Error::Config("inner loop needs m >= 1".into()));
        }
        let nw = self.specs.len();
        let mut sched = Scheduler::new(self.tau);
        let mut busy = vec![false; nw];
        let mut events: BinaryHeap<Reverse<(u64, usize, u64)>> = BinaryHeap::new();
        let mut in_flight: BTreeMap<u64, M::Reply> = BTreeMap::new();
        let mut records = Vec::with_capacity(m);

        self.dispatch_idle(&mut sched, &mut busy, &mut events, &mut in_flight, master, worker)?;
        while records.len() < m {
            let Reverse((time, w, seq)) = events
                .pop()
                .ok_or_else(|| Error::Simulation("event queue drained before m updates".into()))?;
            self.clock = time;
            let reply = in_flight.remove(&seq).expect("event has a reply");
            sched.arrive(seq, reply);
            debug_assert!(busy[w]);
            while records.len() < m {
                let Some(p) = sched.take_applicable() else { break };
                let rec = StalenessRecord { epoch, t: sched.applied() - 1, version: p.version, worker: p.worker };
                debug_assert!(rec.staleness() <= self.tau);
                busy[p.worker] = false;
                master.apply(rec, p.reply.expect("applied results have arrived"))?;
                records.push(rec);
            }
            if records.len() < m {
                self.dispatch_idle(&mut sched, &mut busy, &mut events, &mut in_flight, master, worker)?;
            }
        }
        // Barrier: everything still outstanding is finished and dropped.
        for p in sched.drain() {
            let reply = match p.reply {
                Some(r) => r,
                None => in_flight.remove(&p.seq).expect("in-flight reply"),
            };
            master.discard(p.worker, reply)?;
        }
        if let Some(Reverse((t, _, _))) = events.iter().max() {
            self.clock = self.clock.max(*t);
        }
        Ok(records)
    }

    fn dispatch_idle<M, W>(
        &mut self,
        sched: &mut Scheduler<M::Reply>,
        busy: &mut [bool],
        events: &mut BinaryHeap<Reverse<(u64, usize, u64)>>,
        in_flight: &mut BTreeMap<u64, M::Reply>,
        master: &mut M,
        worker: &W,
    ) -> Result<()>
    where
        M: MasterNode,
        W: WorkerNode<M::Task, M::Reply>,
    {
        for w in 0..busy.len() {
            if busy[w] || !sched.can_dispatch() {
                continue;
            }
            let version = sched.applied();
            let task = master.dispatch(w, version)?;
            let reply = worker.work(w, task, &mut self.worker_rngs[w])?;
            let seq = self.seq;
            self.seq += 1;
            let done = self.clock + self.specs[w].latency.sample(&mut self.latency_rngs[w]);
            sched.register(w, version, seq);
            in_flight.insert(seq, reply);
            events.push(Reverse((done, w, seq)));
            busy[w] = true;
        }
        Ok(())
    }
}

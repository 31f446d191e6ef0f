//! Real-thread inner loop.
//!
//! Each worker runs on its own scoped thread and talks to the master only
//! through channels. Admission follows the same staleness rule as the
//! simulated loop, but arrival order depends on the OS scheduler, so runs are
//! not reproducible.

use std::sync::mpsc;

use super::scheduler::Scheduler;
use super::{MasterNode, Simnet, StalenessRecord, WorkerNode};
use crate::{Error, Result};

impl Simnet {
    pub fn run_inner_loop_threaded<M, W>(&mut self, epoch: usize, m: usize, master: &mut M, worker: &W) -> Result<Vec<StalenessRecord>>
    where
        M: MasterNode,
        M::Task: Send,
        M::Reply: Send,
        W: WorkerNode<M::Task, M::Reply>,
    {
        if m == 0 {
            return Err(Error::Config("inner loop needs m >= 1".into()));
        }
        let tau = self.tau;
        let nw = self.specs.len();
        let seq0 = self.seq;
        let rngs = &mut self.worker_rngs;
        let (records, next_seq) = std::thread::scope(|scope| -> Result<(Vec<StalenessRecord>, u64)> {
            let (reply_tx, reply_rx) = mpsc::channel::<(usize, u64, Result<M::Reply>)>();
            let mut task_txs = Vec::with_capacity(nw);
            for (w, rng) in rngs.iter_mut().enumerate() {
                let (tx, rx) = mpsc::channel::<(u64, M::Task)>();
                task_txs.push(tx);
                let reply_tx = reply_tx.clone();
                scope.spawn(move || {
                    for (seq, task) in rx {
                        if reply_tx.send((w, seq, worker.work(w, task, rng))).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(reply_tx);

            let mut sched = Scheduler::new(tau);
            let mut busy = vec![false; nw];
            let mut seq = seq0;
            let mut records = Vec::with_capacity(m);
            let dispatch = |sched: &mut Scheduler<M::Reply>, busy: &mut [bool], master: &mut M, seq: &mut u64| -> Result<()> {
                for w in 0..nw {
                    if busy[w] || !sched.can_dispatch() {
                        continue;
                    }
                    let version = sched.applied();
                    let task = master.dispatch(w, version)?;
                    sched.register(w, version, *seq);
                    task_txs[w].send((*seq, task)).map_err(|_| Error::Simulation("worker thread exited".into()))?;
                    *seq += 1;
                    busy[w] = true;
                }
                Ok(())
            };
            dispatch(&mut sched, &mut busy, master, &mut seq)?;
            let mut in_flight = sched_len(&busy);
            while records.len() < m {
                let (_, s, reply) = reply_rx.recv().map_err(|_| Error::Simulation("all workers exited".into()))?;
                in_flight -= 1;
                sched.arrive(s, reply?);
                while records.len() < m {
                    let Some(p) = sched.take_applicable() else { break };
                    let rec = StalenessRecord { epoch, t: sched.applied() - 1, version: p.version, worker: p.worker };
                    busy[p.worker] = false;
                    master.apply(rec, p.reply.expect("arrived"))?;
                    records.push(rec);
                }
                if records.len() < m {
                    let before = sched_len(&busy);
                    dispatch(&mut sched, &mut busy, master, &mut seq)?;
                    in_flight += sched_len(&busy) - before;
                }
            }
            // Collect stragglers so their bits are still charged.
            for _ in 0..in_flight {
                let (_, s, reply) = reply_rx.recv().map_err(|_| Error::Simulation("all workers exited".into()))?;
                sched.arrive(s, reply?);
            }
            drop(task_txs);
            for p in sched.drain() {
                master.discard(p.worker, p.reply.expect("all stragglers collected"))?;
            }
            Ok((records, seq))
        })?;
        self.seq = next_seq;
        Ok(records)
    }
}

fn sched_len(busy: &[bool]) -> usize {
    busy.iter().filter(|b| **b).count()
}

//! Admission control shared by the simulated and threaded loops.

pub(crate) struct Pending<R> {
    pub worker: usize,
    pub version: usize,
    pub seq: u64,
    /// `Some` once the result has arrived and is waiting to be applied.
    pub reply: Option<R>,
    arrival: u64,
}

/// Tracks outstanding tasks and decides which arrived result may be applied.
///
/// Invariant: sorted by version, the outstanding tasks can be applied as
/// updates `t, t+1, ...` with each staleness at most `tau`. Dispatching only
/// while fewer than `tau + 1` tasks are outstanding preserves it, and the
/// oldest outstanding task is always admissible once it arrives.
pub(crate) struct Scheduler<R> {
    tau: usize,
    applied: usize,
    arrivals: u64,
    pending: Vec<Pending<R>>,
}

impl<R> Scheduler<R> {
    pub fn new(tau: usize) -> Self {
        Self { tau, applied: 0, arrivals: 0, pending: Vec::new() }
    }

    /// Number of updates applied so far, which is also the current version.
    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn can_dispatch(&self) -> bool {
        self.pending.len() <= self.tau
    }

    pub fn register(&mut self, worker: usize, version: usize, seq: u64) {
        debug_assert_eq!(version, self.applied);
        self.pending.push(Pending { worker, version, seq, reply: None, arrival: u64::MAX });
    }

    pub fn arrive(&mut self, seq: u64, reply: R) {
        let p = self.pending.iter_mut().find(|p| p.seq == seq).expect("arrival for a registered task");
        p.reply = Some(reply);
        p.arrival = self.arrivals;
        self.arrivals += 1;
    }

    /// Removes and returns the earliest-arrived result whose application keeps
    /// the remaining tasks feasible, advancing the update counter.
    pub fn take_applicable(&mut self) -> Option<Pending<R>> {
        let mut arrived: Vec<usize> = (0..self.pending.len()).filter(|&i| self.pending[i].reply.is_some()).collect();
        arrived.sort_by_key(|&i| self.pending[i].arrival);
        let idx = arrived.into_iter().find(|&i| self.feasible_without(i))?;
        self.applied += 1;
        Some(self.pending.swap_remove(idx))
    }

    fn feasible_without(&self, i: usize) -> bool {
        let t = self.applied;
        if t - self.pending[i].version > self.tau {
            return false;
        }
        let mut rest: Vec<usize> = self.pending.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.version).collect();
        rest.sort_unstable();
        rest.iter().enumerate().all(|(j, &v)| t + 1 + j <= v + self.tau)
    }

    /// Empties the outstanding set in dispatch order.
    pub fn drain(&mut self) -> Vec<Pending<R>> {
        let mut all = std::mem::take(&mut self.pending);
        all.sort_by_key(|p| p.seq);
        all
    }
}

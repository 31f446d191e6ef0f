use std::ops::Range;

use rayon::prelude::*;

use crate::codec::{BitLedger, Direction, LedgerKind};
use crate::problems::CompositeProblem;

/// Contiguous near-equal shards of `0..n`, the first `n % parts` one longer.
pub fn partition(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Exact full gradient at `snapshot` by sharded map-reduce.
///
/// Each worker sums its shard in index order; shard sums are added in worker
/// order and the total is scaled by `1/n`, so the result does not depend on
/// thread scheduling. With one worker it is bit-identical to
/// [`CompositeProblem::full_grad`]. The exchange (snapshot down, partial sum
/// up, both full precision) is charged to the ledger.
pub fn epoch_barrier(problem: &dyn CompositeProblem, snapshot: &[f64], workers: usize, ledger: &mut BitLedger, step: u64) -> Vec<f64> {
    let n = problem.num_samples();
    let shards = partition(n, workers);
    let partials: Vec<Vec<f64>> = shards.into_par_iter().map(|r| problem.grad_sum_range(r, snapshot)).collect();
    let mut g = vec![0.0; problem.dim()];
    for p in &partials {
        g.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / n as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    let bits = 32 * problem.dim() as u64;
    for _ in 0..workers {
        ledger.record_bits(step, LedgerKind::Barrier, bits, Direction::Down);
    }
    for _ in 0..workers {
        ledger.record_bits(step, LedgerKind::Barrier, bits, Direction::Up);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{logistic_problem, synth_dataset};

    #[test]
    fn partition_covers_range() {
        assert_eq!(partition(10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(partition(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
    }

    #[test]
    fn barrier_matches_serial_reduction() {
        let p = logistic_problem(synth_dataset(101, 13, 2, 0.1).unwrap(), 1e-3, 1e-2).unwrap();
        let x: Vec<f64> = (0..13).map(|j| (j as f64 - 6.0) / 7.0).collect();
        let mut ledger = BitLedger::new();
        assert_eq!(epoch_barrier(&p, &x, 1, &mut ledger, 0), p.full_grad(&x));
        for w in [2, 3, 8] {
            let got = epoch_barrier(&p, &x, w, &mut ledger, 0);
            let mut want = vec![0.0; 13];
            for r in partition(101, w) {
                let s = p.grad_sum_range(r, &x);
                want.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
            }
            want.iter_mut().for_each(|v| *v *= 1.0 / 101.0);
            assert_eq!(got, want);
            let full = p.full_grad(&x);
            assert!(crate::dist_sq(&got, &full).sqrt() <= 1e-14 * crate::norm_sq(&full).sqrt());
        }
    }

    #[test]
    fn barrier_charges_full_precision_both_ways() {
        let p = logistic_problem(synth_dataset(10, 7, 2, 0.0).unwrap(), 0.0, 0.0).unwrap();
        let mut ledger = BitLedger::new();
        epoch_barrier(&p, &[0.0; 7], 4, &mut ledger, 0);
        assert_eq!(ledger.total_bits(), 32 * 7 * 8);
        assert_eq!(ledger.up_bits(), ledger.down_bits());
        assert_eq!(ledger.kind_bits(LedgerKind::Barrier), 32 * 7 * 8);
    }
}

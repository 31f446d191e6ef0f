use rand::Rng;

use crate::problems::CompositeProblem;
use crate::rng::{stream, StreamId};

/// Trajectory of the serial reference method.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    /// Iterate after every update, epoch-major.
    pub iterates: Vec<Vec<f64>>,
    pub snapshots: Vec<Vec<f64>>,
}

/// Plain single-machine proximal SVRG with mini-batches, drawing sample
/// indices from worker 0's stream of `seed`.
///
/// Serves as an independent oracle for the distributed implementation: every
/// gradient here is formed from per-sample gradients directly.
pub fn reference_prox_svrg(
    problem: &dyn CompositeProblem,
    x0: &[f64],
    epochs: usize,
    m: usize,
    eta: f64,
    batch: usize,
    seed: u64,
) -> ReferenceTrajectory {
    let n = problem.num_samples();
    let d = problem.dim();
    let mut rng = stream(seed, StreamId::Worker(0));
    let mut snapshot = x0.to_vec();
    let mut iterates = Vec::with_capacity(epochs * m);
    let mut snapshots = vec![snapshot.clone()];
    for _ in 0..epochs {
        let mut full = vec![0.0; d];
        for i in 0..n {
            let g = problem.grad_sample(i, &snapshot);
            full.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        full.iter_mut().for_each(|v| *v /= n as f64);
        let mut x = snapshot.clone();
        for _ in 0..m {
            let picks: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n)).collect();
            let mut u = full.clone();
            for &a in &picks {
                let gx = problem.grad_sample(a, &x);
                let gs = problem.grad_sample(a, &snapshot);
                for j in 0..d {
                    u[j] += (gx[j] - gs[j]) / batch as f64;
                }
            }
            let v: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi - eta * ui).collect();
            x = problem.prox(eta, &v);
            iterates.push(x.clone());
        }
        snapshot = x;
        snapshots.push(snapshot.clone());
    }
    ReferenceTrajectory { iterates, snapshots }
}

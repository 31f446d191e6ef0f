//! Composite objectives `P(x) = f(x) + h(x)` with `f = (1/n) sum_i f_i`.

mod dataset;
mod libsvm;
mod logistic;
mod mlp;
mod oracle;
mod quadratic;
mod regularizer;

pub use dataset::{synth_dataset, synth_dataset_with, synth_multiclass, Dataset, SynthConfig};
pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm};
pub use logistic::{logistic_problem, LogisticProblem};
pub use mlp::{mlp_problem, MlpProblem};
pub use oracle::{minimize_full_precision, OracleSolution};
pub use quadratic::QuadraticProblem;
pub use regularizer::{soft_threshold, Regularizer};

/// Smooth finite sum plus a proximable regularizer.
///
/// Implementations are immutable after construction and reentrant, so
/// simulated workers may evaluate gradients concurrently.
pub trait CompositeProblem: Send + Sync {
    fn num_samples(&self) -> usize;

    fn dim(&self) -> usize;

    /// `f_i(x)`.
    fn sample_loss(&self, i: usize, x: &[f64]) -> f64;

    /// `out += scale * grad f_i(x)`.
    fn add_sample_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// Lipschitz constant of every `grad f_i`.
    fn smoothness(&self) -> f64;

    fn regularizer(&self) -> &Regularizer;

    fn grad_sample(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.add_sample_grad(i, x, 1.0, &mut g);
        g
    }

    /// Sum of `grad f_i(x)` over `range`, accumulated in index order.
    fn grad_sum_range(&self, range: std::ops::Range<usize>, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for i in range {
            self.add_sample_grad(i, x, 1.0, &mut g);
        }
        g
    }

    /// `(1/n) sum_i grad f_i(x)`, summed in index order then scaled.
    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_samples();
        let mut g = self.grad_sum_range(0..n, x);
        let inv = 1.0 / n as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    /// `f(x)`.
    fn smooth_value(&self, x: &[f64]) -> f64 {
        let n = self.num_samples();
        (0..n).map(|i| self.sample_loss(i, x)).sum::<f64>() / n as f64
    }

    /// `P(x) = f(x) + h(x)`.
    fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.regularizer().value(x)
    }

    fn prox(&self, eta: f64, v: &[f64]) -> Vec<f64> {
        self.regularizer().prox(eta, v)
    }

    /// Mean over `batch` of `grad f_a(x) - grad f_a(snapshot)`.
    fn batch_grad_diff(&self, batch: &[usize], x: &[f64], snapshot: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let scale = 1.0 / batch.len() as f64;
        for &a in batch {
            self.add_sample_grad(a, x, scale, &mut out);
            self.add_sample_grad(a, snapshot, -scale, &mut out);
        }
        out
    }
}

/// `G_eta(x) = (x - prox_{eta h}(x - eta grad f(x))) / eta`.
pub fn gradient_mapping(problem: &dyn CompositeProblem, x: &[f64], eta: f64) -> Vec<f64> {
    let g = problem.full_grad(x);
    gradient_mapping_with_grad(problem, x, &g, eta)
}

pub fn gradient_mapping_with_grad(problem: &dyn CompositeProblem, x: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    let step: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - eta * gi).collect();
    let p = problem.prox(eta, &step);
    x.iter().zip(&p).map(|(xi, pi)| (xi - pi) / eta).collect()
}

/// `||G_eta(x)||^2`.
pub fn gradient_mapping_norm(problem: &dyn CompositeProblem, x: &[f64], eta: f64) -> f64 {
    crate::norm_sq(&gradient_mapping(problem, x, eta))
}

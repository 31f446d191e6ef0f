use super::{CompositeProblem, Dataset, Regularizer};
use crate::{Error, Result};

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L1/L2-regularized binary logistic regression.
///
/// The L2 term sits in each `f_i`; the L1 term is the whole of `h`.
#[derive(Clone, Debug)]
pub struct LogisticProblem {
    data: Dataset,
    lambda2: f64,
    reg: Regularizer,
    smoothness: f64,
}

/// Builds the problem; labels must be exactly `+1` or `-1`.
pub fn logistic_problem(data: Dataset, lambda1: f64, lambda2: f64) -> Result<LogisticProblem> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((index, &label)) = data.labels().iter().enumerate().find(|(_, y)| **y != 1.0 && **y != -1.0) {
        return Err(Error::InvalidLabel { index, label, msg: "expected +1 or -1".into() });
    }
    if lambda1 < 0.0 || lambda2 < 0.0 {
        return Err(Error::Config("regularization weights must be nonnegative".into()));
    }
    let max_row = (0..data.len()).map(|i| data.row_norm_sq(i)).fold(0.0, f64::max);
    Ok(LogisticProblem { smoothness: max_row / 4.0 + lambda2, data, lambda2, reg: Regularizer::l1(lambda1) })
}

impl LogisticProblem {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Replaces the regularizer, e.g. to add a box for accelerated runs.
    pub fn with_regularizer(mut self, reg: Regularizer) -> Self {
        self.reg = reg;
        self
    }

    /// Overrides the estimated smoothness constant.
    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = l;
        self
    }

    /// Fraction of samples with `sign(<a_i, x>) == y_i`.
    pub fn accuracy(&self, x: &[f64]) -> f64 {
        let hits = (0..self.data.len())
            .filter(|&i| {
                let m = self.data.dot(i, x);
                (if m >= 0.0 { 1.0 } else { -1.0 }) == self.data.label(i)
            })
            .count();
        hits as f64 / self.data.len() as f64
    }
}

impl CompositeProblem for LogisticProblem {
    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn sample_loss(&self, i: usize, x: &[f64]) -> f64 {
        let y = self.data.label(i);
        softplus(-y * self.data.dot(i, x)) + 0.5 * self.lambda2 * crate::norm_sq(x)
    }

    fn add_sample_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let y = self.data.label(i);
        let coef = -y * sigmoid(-y * self.data.dot(i, x)) * scale;
        let (idx, val) = self.data.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j as usize] += coef * v;
        }
        if self.lambda2 != 0.0 {
            let k = scale * self.lambda2;
            out.iter_mut().zip(x).for_each(|(o, xi)| *o += k * xi);
        }
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn regularizer(&self) -> &Regularizer {
        &self.reg
    }
}

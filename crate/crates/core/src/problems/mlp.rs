use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{CompositeProblem, Dataset, Regularizer};
use crate::{Error, Result};

/// One-hidden-layer ReLU network with softmax cross-entropy.
///
/// Parameters are one flat vector laid out as `W1` (input-major,
/// `d_in x hidden`), `b1`, `W2` (`classes x hidden`), `b2`. The L2 penalty
/// covers every parameter and lives in the smooth part, so `h = 0`.
#[derive(Clone, Debug)]
pub struct MlpProblem {
    data: Dataset,
    hidden: usize,
    classes: usize,
    lambda2: f64,
    smoothness: f64,
    reg: Regularizer,
}

/// Builds the network; labels must be integers in `0..classes`, where
/// `classes` is one more than the largest label (at least 2).
pub fn mlp_problem(data: Dataset, hidden: usize, lambda2: f64) -> Result<MlpProblem> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hidden == 0 {
        return Err(Error::Config("hidden layer needs at least one unit".into()));
    }
    let mut max = 0usize;
    for (index, &label) in data.labels().iter().enumerate() {
        if label < 0.0 || label.fract() != 0.0 || label > u32::MAX as f64 {
            return Err(Error::InvalidLabel { index, label, msg: "expected a class index".into() });
        }
        max = max.max(label as usize);
    }
    let classes = (max + 1).max(2);
    Ok(MlpProblem { data, hidden, classes, lambda2, smoothness: 1.0, reg: Regularizer::none() })
}

struct Forward {
    z1: Vec<f64>,
    probs: Vec<f64>,
    loss: f64,
}

impl MlpProblem {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// The network has no global smoothness constant; this sets the value
    /// reported to step-size rules (default 1).
    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = l;
        self
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = self.data.dim() * self.hidden;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.classes * self.hidden;
        (w1, b1, w2, w2 + self.classes)
    }

    /// Small random weights (scaled Gaussian), zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (w1, b1, w2, end) = self.offsets();
        let mut x = vec![0.0; end];
        let n1 = Normal::new(0.0, (2.0 / self.data.dim() as f64).sqrt()).expect("positive std");
        let n2 = Normal::new(0.0, (1.0 / self.hidden as f64).sqrt()).expect("positive std");
        x[..w1].iter_mut().for_each(|v| *v = n1.sample(rng));
        x[b1..w2].iter_mut().for_each(|v| *v = n2.sample(rng));
        x
    }

    /// Validates the parameter length before evaluating the loss.
    pub fn checked_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.value(x))
    }

    pub fn accuracy(&self, x: &[f64]) -> f64 {
        let hits = (0..self.data.len())
            .filter(|&i| {
                let f = self.forward(i, x);
                let best = f.probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|p| p.0);
                best == Some(self.data.label(i) as usize)
            })
            .count();
        hits as f64 / self.data.len() as f64
    }

    fn forward(&self, i: usize, x: &[f64]) -> Forward {
        let h = self.hidden;
        let (w1, b1, w2, _) = self.offsets();
        let mut z1 = x[w1..b1].to_vec();
        let (idx, val) = self.data.row(i);
        for (&j, &a) in idx.iter().zip(val) {
            let row = &x[j as usize * h..(j as usize + 1) * h];
            z1.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
        }
        let mut logits: Vec<f64> = x[w2..].to_vec();
        for (c, l) in logits.iter_mut().enumerate() {
            let row = &x[b1 + c * h..b1 + (c + 1) * h];
            *l += row.iter().zip(&z1).map(|(w, z)| w * z.max(0.0)).sum::<f64>();
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let y = self.data.label(i) as usize;
        let loss = m + sum.ln() - logits[y];
        let probs = logits.iter().map(|l| (l - m).exp() / sum).collect();
        Forward { z1, probs, loss }
    }
}

impl CompositeProblem for MlpProblem {
    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.offsets().3
    }

    fn sample_loss(&self, i: usize, x: &[f64]) -> f64 {
        self.forward(i, x).loss + 0.5 * self.lambda2 * crate::norm_sq(x)
    }

    fn add_sample_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let h = self.hidden;
        let (w1, b1, w2, _) = self.offsets();
        let Forward { z1, mut probs, .. } = self.forward(i, x);
        probs[self.data.label(i) as usize] -= 1.0;
        let dz2 = probs;
        let mut dz1 = vec![0.0; h];
        for (c, &g) in dz2.iter().enumerate() {
            let g = g * scale;
            out[w2 + c] += g;
            let wrow = &x[b1 + c * h..b1 + (c + 1) * h];
            let orow = &mut out[b1 + c * h..b1 + (c + 1) * h];
            for k in 0..h {
                orow[k] += g * z1[k].max(0.0);
                dz1[k] += g * wrow[k];
            }
        }
        for (k, d) in dz1.iter_mut().enumerate() {
            if z1[k] <= 0.0 {
                *d = 0.0;
            }
        }
        out[w1..b1].iter_mut().zip(&dz1).for_each(|(o, d)| *o += d);
        let (idx, val) = self.data.row(i);
        for (&j, &a) in idx.iter().zip(val) {
            let orow = &mut out[j as usize * h..(j as usize + 1) * h];
            orow.iter_mut().zip(&dz1).for_each(|(o, d)| *o += a * d);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::synth_multiclass;
    use crate::rng::{stream, StreamId};

    fn toy() -> MlpProblem {
        mlp_problem(synth_multiclass(10, 6, 3, 2, 1.0).unwrap(), 7, 1e-2).unwrap()
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let p = toy();
        let mut rng = stream(11, StreamId::Master);
        let x = p.init_params(&mut rng);
        for i in 0..p.num_samples() {
            let g = p.grad_sample(i, &x);
            let h = 1e-6;
            let fd: Vec<f64> = (0..p.dim())
                .map(|j| {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[j] += h;
                    b[j] -= h;
                    (p.sample_loss(i, &a) - p.sample_loss(i, &b)) / (2.0 * h)
                })
                .collect();
            let err = crate::dist_sq(&g, &fd).sqrt() / crate::norm_sq(&g).sqrt();
            assert!(err <= 1e-4, "sample {i}: relative error {err}");
        }
    }

    #[test]
    fn zero_network_is_uniform() {
        let p = mlp_problem(synth_multiclass(12, 4, 4, 1, 1.0).unwrap(), 5, 0.0).unwrap();
        let x = vec![0.0; p.dim()];
        for i in 0..p.num_samples() {
            assert!((p.sample_loss(i, &x) - 4f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn one_gradient_step_descends() {
        let p = toy();
        let x = p.init_params(&mut stream(3, StreamId::Master));
        let g = p.full_grad(&x);
        let x1: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - 1e-2 * b).collect();
        assert!(p.value(&x1) < p.value(&x));
    }

    #[test]
    fn rejects_bad_labels_and_lengths() {
        let mut d = Dataset::new(2);
        d.push_row(0.5, &[(0, 1.0)]).unwrap();
        assert!(matches!(mlp_problem(d, 3, 0.0), Err(Error::InvalidLabel { .. })));
        let p = toy();
        assert!(matches!(p.checked_value(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(p.dim(), 6 * 7 + 7 + 3 * 7 + 3);
    }
}

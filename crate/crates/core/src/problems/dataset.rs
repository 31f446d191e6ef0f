use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, StreamId};
use crate::{Error, Result};

/// Row-compressed sparse samples with one label each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, indptr: vec![0], indices: Vec::new(), values: Vec::new(), labels: Vec::new() }
    }

    /// Appends a row of `(0-based index, value)` pairs. Indices must be `< dim`.
    pub fn push_row(&mut self, label: f64, features: &[(u32, f64)]) -> Result<()> {
        for &(j, v) in features {
            if j as usize >= self.dim {
                return Err(Error::IndexOutOfRange { index: j as usize, dim: self.dim });
            }
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * x[j as usize]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// Shape and noise of a synthetic binary dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Probability of flipping each label.
    pub flip_noise: f64,
    /// Feature `j` has standard deviation proportional to `(j + 1)^-decay`;
    /// 0 gives isotropic features, larger values an ill-conditioned problem.
    pub spectrum_decay: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 1000, d: 50, seed: 0, flip_noise: 0.0, spectrum_decay: 0.0 }
    }
}

/// Reproducible linearly-separable-up-to-noise binary data.
///
/// Features are independent Gaussians scaled so rows have unit expected
/// squared norm. A planted `w ~ N(0, I)` labels each row by `sign(<a, w>)`;
/// each label is then flipped with probability `flip_noise`.
pub fn synth_dataset(n: usize, d: usize, seed: u64, flip_noise: f64) -> Result<Dataset> {
    synth_dataset_with(&SynthConfig { n, d, seed, flip_noise, spectrum_decay: 0.0 })
}

pub fn synth_dataset_with(cfg: &SynthConfig) -> Result<Dataset> {
    let SynthConfig { n, d, seed, flip_noise, spectrum_decay } = *cfg;
    if n == 0 || d == 0 {
        return Err(Error::Config("synthetic dataset needs n, d >= 1".into()));
    }
    if !(0.0..=1.0).contains(&flip_noise) {
        return Err(Error::Config(format!("flip noise {flip_noise} outside [0, 1]")));
    }
    if !(spectrum_decay >= 0.0 && spectrum_decay.is_finite()) {
        return Err(Error::Config(format!("spectrum decay must be finite and >= 0, got {spectrum_decay}")));
    }
    let mut rng = stream(seed, StreamId::Data);
    let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let raw: Vec<f64> = (0..d).map(|j| (j as f64 + 1.0).powf(-spectrum_decay)).collect();
    let total: f64 = raw.iter().map(|s| s * s).sum();
    let scales: Vec<f64> = raw.iter().map(|s| s / total.sqrt()).collect();
    let mut data = Dataset::new(d);
    let mut row = Vec::with_capacity(d);
    for _ in 0..n {
        row.clear();
        let mut margin = 0.0;
        for (j, (wj, sj)) in w.iter().zip(&scales).enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let a = z * sj;
            margin += a * wj;
            row.push((j as u32, a));
        }
        let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < flip_noise {
            y = -y;
        }
        data.push_row(y, &row)?;
    }
    Ok(data)
}

/// Gaussian blobs for multiclass tests: class `c` is centred at a random unit
/// mean scaled by `separation`, labels are `0..classes`.
pub fn synth_multiclass(n: usize, d: usize, classes: usize, seed: u64, separation: f64) -> Result<Dataset> {
    if n == 0 || d == 0 || classes < 2 {
        return Err(Error::Config("multiclass dataset needs n, d >= 1 and classes >= 2".into()));
    }
    let mut rng = stream(seed, StreamId::Data);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let m: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = crate::norm_sq(&m).sqrt();
            m.iter().map(|v| v / norm * separation).collect()
        })
        .collect();
    let scale = 1.0 / (d as f64).sqrt();
    let mut data = Dataset::new(d);
    for i in 0..n {
        let c = i % classes;
        let row: Vec<(u32, f64)> = (0..d)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (j as u32, means[c][j] + z * scale)
            })
            .collect();
        data.push_row(c as f64, &row)?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic() {
        let a = synth_dataset(50, 7, 3, 0.1).unwrap();
        let b = synth_dataset(50, 7, 3, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_dataset(50, 7, 4, 0.1).unwrap());
        assert!(a.labels().iter().all(|y| *y == 1.0 || *y == -1.0));
    }

    #[test]
    fn push_row_checks_bounds() {
        let mut d = Dataset::new(3);
        assert!(d.push_row(1.0, &[(3, 1.0)]).is_err());
        d.push_row(1.0, &[(0, 2.0), (2, -1.0)]).unwrap();
        assert_eq!(d.dot(0, &[1.0, 5.0, 1.0]), 1.0);
    }
}

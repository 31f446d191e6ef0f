use super::{CompositeProblem, Regularizer};

/// `f_i(x) = (c/2) ||x - c_i||^2`, handy for closed-form checks.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    centers: Vec<Vec<f64>>,
    curvature: f64,
    reg: Regularizer,
}

impl QuadraticProblem {
    pub fn new(centers: Vec<Vec<f64>>, curvature: f64, reg: Regularizer) -> Self {
        assert!(!centers.is_empty(), "need at least one center");
        let d = centers[0].len();
        assert!(centers.iter().all(|c| c.len() == d), "centers must share a dimension");
        Self { centers, curvature, reg }
    }

    /// Minimizer of the smooth part: the mean of the centers.
    pub fn smooth_minimizer(&self) -> Vec<f64> {
        let n = self.centers.len() as f64;
        let mut m = vec![0.0; self.dim()];
        for c in &self.centers {
            m.iter_mut().zip(c).for_each(|(a, b)| *a += b / n);
        }
        m
    }
}

impl CompositeProblem for QuadraticProblem {
    fn num_samples(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn sample_loss(&self, i: usize, x: &[f64]) -> f64 {
        0.5 * self.curvature * crate::dist_sq(x, &self.centers[i])
    }

    fn add_sample_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let k = scale * self.curvature;
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.centers[i]) {
            *o += k * (xi - ci);
        }
    }

    fn smoothness(&self) -> f64 {
        self.curvature
    }

    fn regularizer(&self) -> &Regularizer {
        &self.reg
    }
}

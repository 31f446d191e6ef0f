use serde::{Deserialize, Serialize};

/// `h(x) = lambda1 ||x||_1`, optionally restricted to the box
/// `||x||_inf <= radius`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub l1: f64,
    pub box_radius: Option<f64>,
}

impl Regularizer {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn l1(lambda: f64) -> Self {
        Self { l1: lambda, box_radius: None }
    }

    pub fn with_box(mut self, radius: f64) -> Self {
        self.box_radius = Some(radius);
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if let Some(r) = self.box_radius {
            if x.iter().any(|v| v.abs() > r) {
                return f64::INFINITY;
            }
        }
        if self.l1 == 0.0 {
            0.0
        } else {
            self.l1 * crate::norm_l1(x)
        }
    }

    /// `argmin_y h(y) + ||y - v||^2 / (2 eta)`: soft-threshold, then clip to the box.
    pub fn prox(&self, eta: f64, v: &[f64]) -> Vec<f64> {
        let t = eta * self.l1;
        v.iter()
            .map(|&x| {
                let y = soft_threshold(x, t);
                match self.box_radius {
                    Some(r) => y.clamp(-r, r),
                    None => y,
                }
            })
            .collect()
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

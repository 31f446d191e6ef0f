use super::{gradient_mapping_with_grad, CompositeProblem};

/// Full-precision reference solution.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// `||G_{1/L}(x)||^2` at the returned point.
    pub grad_mapping_sq: f64,
    pub iters: usize,
}

/// Accelerated proximal gradient with step `1/L` and function-value restarts.
///
/// Stops once `||G_{1/L}(x)||^2 <= tol` or after `max_iters` iterations. Used to
/// estimate `P*` for loss-gap targets.
pub fn minimize_full_precision(problem: &dyn CompositeProblem, x0: &[f64], max_iters: usize, tol: f64) -> OracleSolution {
    let eta = 1.0 / problem.smoothness();
    let mut x = problem.prox(eta, x0);
    let mut x_val = problem.value(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iters = 0;
    let mut gm = f64::INFINITY;
    while iters < max_iters {
        iters += 1;
        let g = problem.full_grad(&y);
        let step: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - eta * gi).collect();
        let x_next = problem.prox(eta, &step);
        let next_val = problem.value(&x_next);
        if next_val > x_val {
            // Momentum overshot: restart from the current iterate.
            y.clone_from(&x);
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = x_next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = x_next;
        x_val = next_val;
        t = t_next;
        if iters % 10 == 0 || iters == max_iters {
            gm = crate::norm_sq(&gradient_mapping_with_grad(problem, &x, &problem.full_grad(&x), eta));
            if gm <= tol {
                break;
            }
        }
    }
    if !gm.is_finite() || iters % 10 != 0 {
        gm = crate::norm_sq(&gradient_mapping_with_grad(problem, &x, &problem.full_grad(&x), eta));
    }
    OracleSolution { x, value: x_val, grad_mapping_sq: gm, iters }
}

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::Parameterized;
use crate::error::Result;

/// Gradients smaller than this in both routes are compared on an absolute scale.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares analytic gradients against central differences.
///
/// `loss_and_grad` returns the scalar loss and its gradient for the given
/// parameters. At most `max_coords` coordinates are checked (all of them
/// when the model is smaller), sampled deterministically from `seed`.
pub fn grad_check<P, F>(
    mut loss_and_grad: F,
    params: &P,
    step: f64,
    tolerance: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    P: Parameterized,
    F: FnMut(&P) -> Result<(f64, P)>,
{
    let (_, analytic) = loss_and_grad(params)?;
    let n = params.num_params();
    let mut coords: Vec<usize> = if n <= max_coords {
        (0..n).collect()
    } else {
        sample(&mut ChaCha8Rng::seed_from_u64(seed), n, max_coords).into_vec()
    };
    coords.sort_unstable();

    let mut report = GradCheckReport {
        checked: coords.len(),
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        tolerance,
    };
    let mut probe = params.clone();
    for &idx in &coords {
        let original = params.get_coord(idx);
        probe.set_coord(idx, original + step);
        let (plus, _) = loss_and_grad(&probe)?;
        probe.set_coord(idx, original - step);
        let (minus, _) = loss_and_grad(&probe)?;
        probe.set_coord(idx, original);

        let numeric = (plus - minus) / (2.0 * step);
        let exact = analytic.get_coord(idx);
        let scale = exact.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        let rel = (exact - numeric).abs() / scale;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = idx;
            report.analytic = exact;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::DenseParams;

    #[test]
    fn linear_model_is_exact() {
        // loss = sum_k (W x + b)_k * c_k is linear in every parameter.
        let mut p = DenseParams::zeros(3, 2);
        p.weights = vec![0.3, -1.2, 0.8, 2.0, 0.1, -0.5];
        p.bias = vec![0.2, -0.7];
        let x = [1.5, -2.0, 0.25];
        let c = [0.9, -1.1];
        let report = grad_check(
            |q: &DenseParams| {
                let mut y = [0.0; 2];
                q.forward(&x, &mut y);
                let loss = y[0] * c[0] + y[1] * c[1];
                let mut g = q.zeros_like();
                let mut dx = [0.0; 3];
                q.backward(&x, &c, &mut g, &mut dx);
                Ok((loss, g))
            },
            &p,
            1e-5,
            1e-9,
            200,
            0,
        )
        .unwrap();
        assert_eq!(report.checked, 8);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = DenseParams::zeros(1, 1);
        let report = grad_check(
            |q: &DenseParams| {
                let w = q.weights[0];
                let mut g = q.zeros_like();
                g.weights[0] = 3.0 * w + 1.0; // true derivative of w^2 + w is 2w + 1
                g.bias[0] = 0.0;
                Ok((w * w + w, g))
            },
            &{
                let mut q = p.clone();
                q.weights[0] = 2.0;
                q
            },
            1e-5,
            1e-4,
            200,
            0,
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.worst_index, 0);
    }
}

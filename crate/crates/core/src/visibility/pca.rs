use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Cumulative-variance slack so that a target of 1.0 stops at the data rank.
const CUMULATIVE_SLACK: f64 = 1e-12;

/// Standardize-then-project transform fitted by [`pca_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Retained principal axes, each of length `d`, in decreasing variance order.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of every axis (retained or not), non-increasing.
    pub explained_variance: Vec<f64>,
    pub retained_fraction: f64,
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "PCA expects {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let z: Vec<f64> = x
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest absolute entry of `PᵀP − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Z-scores the columns, eigendecomposes the sample covariance and keeps the
/// fewest leading components reaching `variance_target`.
pub fn pca_fit(features: &[Vec<f64>], variance_target: f64) -> Result<PcaProjection> {
    pca_fit_with(features, variance_target, true)
}

/// As [`pca_fit`]; with `standardize = false` only the mean is removed.
pub fn pca_fit_with(features: &[Vec<f64>], variance_target: f64, standardize: bool) -> Result<PcaProjection> {
    let m = features.len();
    if m < 2 {
        return Err(Error::Fit(format!("PCA needs at least 2 rows, got {m}")));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Config(format!(
            "variance target must be in (0, 1], got {variance_target}"
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("PCA rows must share a non-zero width".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }

    let mut mean = vec![0.0; d];
    for row in features {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut scale = vec![0.0; d];
    for row in features {
        for ((acc, v), mu) in scale.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu).powi(2);
        }
    }
    for s in scale.iter_mut() {
        let sd = (*s / (m - 1) as f64).sqrt();
        *s = if sd > 0.0 && standardize { sd } else { 1.0 };
    }

    let z = DMatrix::from_fn(m, d, |i, j| (features[i][j] - mean[j]) / scale[j]);
    let cov = (z.transpose() * &z) / (m - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let explained_variance: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = explained_variance.iter().sum();

    let mut retained = d;
    let mut cumulative = 0.0;
    if total > 0.0 {
        for (r, ev) in explained_variance.iter().enumerate() {
            cumulative += ev;
            if cumulative / total >= variance_target - CUMULATIVE_SLACK {
                retained = r + 1;
                break;
            }
        }
    } else {
        retained = 1;
    }
    let retained_fraction = if total > 0.0 {
        explained_variance[..retained].iter().sum::<f64>() / total
    } else {
        1.0
    };

    let components = order[..retained]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let pivot = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    Ok(PcaProjection {
        mean,
        scale,
        components,
        explained_variance,
        retained_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_target_keeps_rank() {
        // Third column is a copy of the first, so the rank is 2.
        let rows: Vec<Vec<f64>> = [[1.0, 2.0], [2.0, 1.0], [3.0, 5.0], [0.0, 4.0], [5.0, 0.5]]
            .iter()
            .map(|r| vec![r[0], r[1], r[0]])
            .collect();
        let p = pca_fit(&rows, 1.0).unwrap();
        assert_eq!(p.output_dim(), 2);
        assert!(p.orthonormality_error() < 1e-9);
        let q = pca_fit(&rows[..2], 1.0).unwrap();
        assert_eq!(q.output_dim(), 1);
    }

    #[test]
    fn axis_aligned_unscaled() {
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let a = if i & 1 == 0 { -1.0 } else { 1.0 };
                let b = if i & 2 == 0 { -1.0 } else { 1.0 };
                let c = if i & 4 == 0 { -1.0 } else { 1.0 };
                vec![0.2 * a, 10.0 * b, 0.5 * c]
            })
            .collect();
        let p = pca_fit_with(&rows, 0.9, false).unwrap();
        let c = &p.components[0];
        assert!((c[1] - 1.0).abs() < 1e-6 && c[0].abs() < 1e-6 && c[2].abs() < 1e-6);
        assert_eq!(p.output_dim(), 1);
    }

    #[test]
    fn dominant_axis() {
        // Independent axes after standardization are equal-variance, so use
        // correlated data where column 1 carries both directions.
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 - 19.5;
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![t, t + 0.1 * s, 0.0]
            })
            .collect();
        let p = pca_fit(&rows, 0.5).unwrap();
        let c = &p.components[0];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0] - h).abs() < 1e-6 && (c[1] - h).abs() < 1e-6 && c[2].abs() < 1e-6);
        assert_eq!(p.scale[2], 1.0);
        assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn two_by_two_closed_form() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 1.0]];
        let p = pca_fit(&rows, 1.0).unwrap();

        // Independent oracle: correlation matrix [[1, r], [r, 1]] has
        // eigenvalues 1 ± r with axes (1, 1)/√2 and (1, −1)/√2.
        let mx = 4.0 / 3.0;
        let my = 1.0;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for r in &rows {
            sxx += (r[0] - mx) * (r[0] - mx);
            syy += (r[1] - my) * (r[1] - my);
            sxy += (r[0] - mx) * (r[1] - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        let (hi, lo) = if corr >= 0.0 { (1.0 + corr, 1.0 - corr) } else { (1.0 - corr, 1.0 + corr) };
        assert!((p.explained_variance[0] - hi).abs() < 1e-12);
        assert!((p.explained_variance[1] - lo).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let first = &p.components[0];
        assert!((first[0].abs() - h).abs() < 1e-9 && (first[1].abs() - h).abs() < 1e-9);
        assert_eq!(first[0] * first[1] > 0.0, corr > 0.0);
    }

    #[test]
    fn sign_convention() {
        let rows = vec![vec![0.0, 3.0], vec![1.0, 1.0], vec![2.0, 0.5], vec![4.0, -2.0]];
        let p = pca_fit(&rows, 1.0).unwrap();
        for c in &p.components {
            let max = c.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(pca_fit(&[vec![1.0]], 0.9), Err(Error::Fit(_))));
        assert!(pca_fit(&[vec![1.0], vec![1.0, 2.0]], 0.9).is_err());
        assert!(pca_fit(&[vec![1.0], vec![2.0]], 0.0).is_err());
    }
}

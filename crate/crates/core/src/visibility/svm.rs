use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            iterations: 1000,
        }
    }
}

/// `w·x + b > 0` predicts the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "SVM expects {} inputs, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Exact zero is negative.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }
}

/// Full-batch subgradient descent on
/// `λ/2 ‖(w, b)‖² + mean_i max(0, 1 − y_i (w·x_i + b))` with `λ = 1/C`,
/// step `1/(λt)` and projection onto the ball of radius `1/√λ`.
///
/// The bias is learned as the weight of a constant feature. Every step uses
/// the whole data set, so the result is deterministic and invariant to
/// duplicating rows.
pub fn svm_fit(x: &[Vec<f64>], labels: &[bool], config: &SvmConfig) -> Result<LinearSvm> {
    if x.len() != labels.len() || x.is_empty() {
        return Err(Error::Shape("SVM needs one label per non-empty row".into()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::Fit("SVM training set has a single class".into()));
    }
    if !(config.c > 0.0 && config.c.is_finite()) || config.iterations == 0 {
        return Err(Error::Config("SVM needs C > 0 and at least one iteration".into()));
    }
    let r = x[0].len();
    if x.iter().any(|row| row.len() != r) {
        return Err(Error::Shape("SVM rows must share a width".into()));
    }
    let m = x.len() as f64;
    let lambda = 1.0 / config.c;
    let radius = 1.0 / lambda.sqrt();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    // Last entry is the bias.
    let mut w = vec![0.0; r + 1];
    let mut g = vec![0.0; r + 1];
    for t in 1..=config.iterations {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (row, &yi) in x.iter().zip(&y) {
            let margin = yi * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[r]);
            if margin < 1.0 {
                for (gj, v) in g.iter_mut().zip(row) {
                    *gj += yi * v;
                }
                g[r] += yi;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj = shrink * *wj + eta * gj / m;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVM weights diverged".into()));
    }
    let bias = w.pop().expect("bias slot");
    Ok(LinearSvm {
        weights: w,
        bias,
        c: config.c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accuracy(svm: &LinearSvm, x: &[Vec<f64>], y: &[bool]) -> f64 {
        let hits = x.iter().zip(y).filter(|(r, &l)| svm.predict(r).unwrap() == l).count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn one_dimensional_separable() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![false, true];
        let svm = svm_fit(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(accuracy(&svm, &x, &y), 1.0);
    }

    #[test]
    fn duplication_invariance() {
        let x = vec![vec![0.2, 1.0], vec![1.5, -0.3], vec![-1.0, -0.5], vec![-0.4, 0.9], vec![0.1, 0.1]];
        let y = vec![true, true, false, false, true];
        let cfg = SvmConfig { c: 3.0, iterations: 500 };
        let a = svm_fit(&x, &y, &cfg).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        let y2: Vec<bool> = y.iter().flat_map(|&l| [l, l]).collect();
        let b = svm_fit(&x2, &y2, &cfg).unwrap();
        for (p, q) in a.weights.iter().zip(&b.weights) {
            assert!((p - q).abs() < 1e-6);
        }
        assert!((a.bias - b.bias).abs() < 1e-6);
    }

    #[test]
    fn max_margin_direction() {
        // Closest pair is ±(1, 1); every other point projects further onto
        // (1, 1), so the hard-margin boundary is x + y = 0.
        let pos = [[1.0, 1.0], [2.0, 3.0], [3.0, 1.5], [0.5, 2.5], [4.0, 0.5]];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for p in pos {
            x.push(p.to_vec());
            y.push(true);
            x.push(vec![-p[0], -p[1]]);
            y.push(false);
        }
        let svm = svm_fit(&x, &y, &SvmConfig { c: 1000.0, iterations: 20000 }).unwrap();
        let (a, b) = (svm.weights[0], svm.weights[1]);
        let cos = (a + b) / ((a * a + b * b).sqrt() * 2f64.sqrt());
        let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 5.0, "angle {angle}");
        assert_eq!(accuracy(&svm, &x, &y), 1.0);
    }

    #[test]
    fn tie_is_negative() {
        let svm = LinearSvm { weights: vec![0.0, 0.0], bias: 0.0, c: 1.0 };
        assert!(!svm.predict(&[3.0, -2.0]).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let err = svm_fit(&[vec![1.0], vec![2.0]], &[true, true], &SvmConfig::default());
        assert!(matches!(err, Err(Error::Fit(_))));
    }
}

use rand::Rng;

use crate::error::{Error, Result};

/// A model whose parameters can be viewed as a fixed list of flat tensors.
///
/// Gradients use the same type as the parameters they belong to.
pub trait Parameterized: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Reads coordinate `index` of the concatenated parameter vector.
    fn get_coord(&self, mut index: usize) -> f64 {
        for t in self.tensors() {
            if index < t.len() {
                return t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range")
    }

    fn set_coord(&mut self, mut index: usize, value: f64) {
        for t in self.tensors_mut() {
            if index < t.len() {
                t[index] = value;
                return;
            }
            index -= t.len();
        }
        panic!("parameter index out of range")
    }
}

/// LSTM gate blocks, in the order they are stacked in [`LstmParams::weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

/// Single-layer LSTM weights.
///
/// `weights` stacks the four gate matrices (input, forget, output,
/// candidate), each `hidden x (input + hidden)`, into one row-major
/// `4*hidden x (input + hidden)` matrix. Columns `0..input` act on the
/// one-hot input, the remaining `hidden` columns on the previous hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            weights: vec![0.0; 4 * hidden_dim * (input_dim + hidden_dim)],
            bias: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform weights in `[-1/sqrt(H), 1/sqrt(H)]`, forget bias 1, other biases 0.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        for w in &mut p.weights {
            *w = rng.gen_range(-bound..=bound);
        }
        let h = hidden_dim;
        p.bias[h..2 * h].fill(1.0);
        p
    }

    pub fn row_len(&self) -> usize {
        self.input_dim + self.hidden_dim
    }

    /// The `hidden x (input + hidden)` block of one gate.
    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let block = self.hidden_dim * self.row_len();
        let start = gate as usize * block;
        &self.weights[start..start + block]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let start = gate as usize * self.hidden_dim;
        &self.bias[start..start + self.hidden_dim]
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.weights.len() != 4 * self.hidden_dim * self.row_len()
            || self.bias.len() != 4 * self.hidden_dim
        {
            return Err(Error::Shape(format!(
                "lstm weights {} / bias {} inconsistent with input {} hidden {}",
                self.weights.len(),
                self.bias.len(),
                self.input_dim,
                self.hidden_dim
            )));
        }
        Ok(())
    }
}

impl Parameterized for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.bias]
    }
}

/// Fully connected layer `y = W x + b` with `W` row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    pub fn init<R: Rng>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, output_dim);
        let bound = 1.0 / (input_dim as f64).sqrt();
        for w in &mut p.weights {
            *w = rng.gen_range(-bound..=bound);
        }
        p
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.input_dim).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients into `grads` and adds `W^T dy` to `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut DenseParams, dx: &mut [f64]) {
        for (k, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.bias[k] += g;
            let row = &self.weights[k * self.input_dim..(k + 1) * self.input_dim];
            let grow = &mut grads.weights[k * self.input_dim..(k + 1) * self.input_dim];
            for j in 0..self.input_dim {
                grow[j] += g * x[j];
                dx[j] += g * row[j];
            }
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.weights.len() != self.input_dim * self.output_dim
            || self.bias.len() != self.output_dim
        {
            return Err(Error::Shape(format!(
                "dense weights {} / bias {} inconsistent with {}x{}",
                self.weights.len(),
                self.bias.len(),
                self.output_dim,
                self.input_dim
            )));
        }
        Ok(())
    }
}

impl Parameterized for DenseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_respects_bounds_and_forget_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::init(6, 16, &mut rng);
        p.check_shapes().unwrap();
        assert!(p.weights.iter().all(|w| w.abs() <= 0.25));
        assert!(p.gate_bias(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(p.gate_bias(Gate::Input).iter().all(|&b| b == 0.0));
        assert_eq!(p.gate_weights(Gate::Candidate).len(), 16 * 22);
    }

    #[test]
    fn coordinates_address_concatenated_tensors() {
        let mut p = DenseParams::zeros(3, 2);
        assert_eq!(p.num_params(), 8);
        p.set_coord(7, 2.5);
        assert_eq!(p.bias[1], 2.5);
        assert_eq!(p.get_coord(7), 2.5);
    }
}

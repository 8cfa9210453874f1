//! LSTM forward pass and backpropagation through time.
//!
//! Cell recurrence with gates stacked as `[i, f, o, g]`:
//!
//! ```text
//! z = W[:, x_t] + W_h h_{t-1} + b
//! i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
//! c_t = f * c_{t-1} + i * g;  h_t = o * tanh(c_t)
//! ```
//!
//! Initial states are zero. Padded positions carry the last real state
//! forward unchanged, so they never need to be computed.

use super::batch::PaddedBatch;
use super::loss::sigmoid;
use super::params::LstmParams;
use crate::error::{Error, Result};

/// Cached activations of one sequence, `len` real steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    pub tokens: Vec<usize>,
    /// `len x 4H`, post-activation `[i, f, o, g]`.
    pub gates: Vec<f64>,
    /// `len x H`.
    pub cells: Vec<f64>,
    /// `len x H`, `tanh(c_t)`.
    pub cell_tanh: Vec<f64>,
    /// `len x H`.
    pub hidden: Vec<f64>,
    hidden_dim: usize,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn hidden_at(&self, t: usize) -> &[f64] {
        &self.hidden[t * self.hidden_dim..(t + 1) * self.hidden_dim]
    }

    pub fn cell_at(&self, t: usize) -> &[f64] {
        &self.cells[t * self.hidden_dim..(t + 1) * self.hidden_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    pub max_len: usize,
    pub hidden_dim: usize,
    pub traces: Vec<LstmTrace>,
}

impl LstmOutput {
    /// Hidden state of row `b` at step `t`, with masked steps repeating the last real state.
    pub fn hidden(&self, b: usize, t: usize) -> Vec<f64> {
        let trace = &self.traces[b];
        if trace.is_empty() {
            vec![0.0; self.hidden_dim]
        } else {
            trace.hidden_at(t.min(trace.len() - 1)).to_vec()
        }
    }

    /// Dense `batch x max_len x hidden` tensor.
    pub fn hidden_tensor(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.traces.len() * self.max_len * self.hidden_dim);
        for b in 0..self.traces.len() {
            for t in 0..self.max_len {
                out.extend(self.hidden(b, t));
            }
        }
        out
    }

    /// Final cell state of each row.
    pub fn final_cells(&self) -> Vec<Vec<f64>> {
        self.traces
            .iter()
            .map(|tr| {
                if tr.is_empty() {
                    vec![0.0; self.hidden_dim]
                } else {
                    tr.cell_at(tr.len() - 1).to_vec()
                }
            })
            .collect()
    }
}

pub(crate) fn forward_sequence(params: &LstmParams, tokens: &[usize]) -> Result<LstmTrace> {
    let h = params.hidden_dim;
    let input = params.input_dim;
    let row_len = params.row_len();
    let len = tokens.len();
    let mut trace = LstmTrace {
        tokens: tokens.to_vec(),
        gates: vec![0.0; len * 4 * h],
        cells: vec![0.0; len * h],
        cell_tanh: vec![0.0; len * h],
        hidden: vec![0.0; len * h],
        hidden_dim: h,
    };
    let mut z = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];
    for (t, &tok) in tokens.iter().enumerate() {
        if tok >= input {
            return Err(Error::Input(format!(
                "token {tok} outside input dimension {input}"
            )));
        }
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &trace.hidden[(t - 1) * h..t * h],
                &trace.cells[(t - 1) * h..t * h],
            )
        };
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &params.weights[r * row_len..(r + 1) * row_len];
            let rec: f64 = row[input..].iter().zip(h_prev).map(|(w, v)| w * v).sum();
            *zr = params.bias[r] + row[tok] + rec;
        }
        let mut cells = vec![0.0; h];
        let mut cell_tanh = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        let gates = &mut trace.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let o = sigmoid(z[2 * h + j]);
            let g = z[3 * h + j].tanh();
            gates[j] = i;
            gates[h + j] = f;
            gates[2 * h + j] = o;
            gates[3 * h + j] = g;
            let c = f * c_prev[j] + i * g;
            cells[j] = c;
            cell_tanh[j] = c.tanh();
            hidden[j] = o * cell_tanh[j];
        }
        if hidden.iter().chain(&cells).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("lstm forward at step {t}")));
        }
        trace.cells[t * h..(t + 1) * h].copy_from_slice(&cells);
        trace.cell_tanh[t * h..(t + 1) * h].copy_from_slice(&cell_tanh);
        trace.hidden[t * h..(t + 1) * h].copy_from_slice(&hidden);
    }
    Ok(trace)
}

/// Runs the LSTM over every row of a padded batch of one-hot token indices.
pub fn lstm_forward(params: &LstmParams, batch: &PaddedBatch) -> Result<LstmOutput> {
    params.check_shapes()?;
    let traces = (0..batch.batch_size())
        .map(|b| forward_sequence(params, batch.row(b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LstmOutput {
        max_len: batch.max_len,
        hidden_dim: params.hidden_dim,
        traces,
    })
}

/// Backpropagates `d_hidden` (`len x H`, the loss gradient w.r.t. each real
/// hidden state) through one trace, accumulating into `grads`.
pub(crate) fn backward_sequence(
    params: &LstmParams,
    trace: &LstmTrace,
    d_hidden: &[f64],
    grads: &mut LstmParams,
) -> Result<()> {
    let h = params.hidden_dim;
    let input = params.input_dim;
    let row_len = params.row_len();
    let len = trace.len();
    if d_hidden.len() != len * h {
        return Err(Error::Shape(format!(
            "hidden gradient has {} entries, expected {}",
            d_hidden.len(),
            len * h
        )));
    }
    let zeros = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..len).rev() {
        let gates = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
        let c_prev = if t == 0 { &zeros[..] } else { trace.cell_at(t - 1) };
        let h_prev = if t == 0 { &zeros[..] } else { trace.hidden_at(t - 1) };
        let cell_tanh = &trace.cell_tanh[t * h..(t + 1) * h];
        for j in 0..h {
            let dh = d_hidden[t * h + j] + dh_next[j];
            let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = cell_tanh[j];
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dh * tc * o * (1.0 - o);
            dz[3 * h + j] = dc * i * (1.0 - g * g);
            dc_next[j] = dc * f;
        }
        dh_next.fill(0.0);
        let tok = trace.tokens[t];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grads.bias[r] += d;
            let base = r * row_len;
            grads.weights[base + tok] += d;
            let row = &params.weights[base + input..base + row_len];
            let grow = &mut grads.weights[base + input..base + row_len];
            for j in 0..h {
                grow[j] += d * h_prev[j];
                dh_next[j] += d * row[j];
            }
        }
    }
    if grads.bias.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("lstm backward".into()));
    }
    Ok(())
}

/// Accumulates parameter gradients for a whole batch. `d_hidden[b]` holds
/// `len_b x H` upstream gradients for row `b`; padded steps have none.
pub fn lstm_backward(
    params: &LstmParams,
    output: &LstmOutput,
    d_hidden: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Result<()> {
    if d_hidden.len() != output.traces.len() {
        return Err(Error::Shape("one hidden gradient per batch row required".into()));
    }
    for (trace, dh) in output.traces.iter().zip(d_hidden) {
        backward_sequence(params, trace, dh, grads)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Parameterized;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Textbook LSTM with explicit one-hot vectors and separate gate matrices.
    fn scalar_reference(p: &LstmParams, tokens: &[usize]) -> Vec<Vec<f64>> {
        let (n_in, n_h) = (p.input_dim, p.hidden_dim);
        let w = |gate: usize, r: usize, c: usize| p.weights[(gate * n_h + r) * (n_in + n_h) + c];
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = vec![0.0; n_h];
        let mut c = vec![0.0; n_h];
        let mut out = Vec::new();
        for &tok in tokens {
            let mut x = vec![0.0; n_in + n_h];
            x[tok] = 1.0;
            x[n_in..].copy_from_slice(&h);
            let pre = |gate: usize, r: usize| {
                let mut s = p.bias[gate * n_h + r];
                for col in 0..n_in + n_h {
                    s += w(gate, r, col) * x[col];
                }
                s
            };
            let mut h_new = vec![0.0; n_h];
            for r in 0..n_h {
                let i = sig(pre(0, r));
                let f = sig(pre(1, r));
                let o = sig(pre(2, r));
                let g = pre(3, r).tanh();
                c[r] = f * c[r] + i * g;
                h_new[r] = o * c[r].tanh();
            }
            h = h_new;
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn zero_params_give_zero_states() {
        let p = LstmParams::zeros(6, 4);
        let batch = PaddedBatch::from_sequences(&[vec![0, 3, 5, 1]]).unwrap();
        let out = lstm_forward(&p, &batch).unwrap();
        assert!(out.hidden_tensor().iter().all(|&v| v == 0.0));
        assert!(out.final_cells()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padding_repeats_last_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::init(5, 3, &mut rng);
        let short = PaddedBatch::from_sequences(&[vec![2]]).unwrap();
        let padded = PaddedBatch::with_max_len(&[vec![2]], 5).unwrap();
        let a = lstm_forward(&p, &short).unwrap();
        let b = lstm_forward(&p, &padded).unwrap();
        assert_eq!(a.hidden(0, 0), b.hidden(0, 0));
        for t in 1..5 {
            assert_eq!(b.hidden(0, t), b.hidden(0, 0));
        }
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = LstmParams::init(5, 3, &mut rng);
        // Larger bias spread exercises all gate regimes.
        for b in &mut p.bias {
            *b = rand::Rng::gen_range(&mut rng, -1.0..1.0);
        }
        let tokens = vec![4, 0, 2, 2];
        let out = lstm_forward(&p, &PaddedBatch::from_sequences(std::slice::from_ref(&tokens)).unwrap()).unwrap();
        let reference = scalar_reference(&p, &tokens);
        for (t, h_ref) in reference.iter().enumerate() {
            for (a, b) in out.hidden(0, t).iter().zip(h_ref) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_tokens_and_bad_shapes() {
        let p = LstmParams::zeros(3, 2);
        let batch = PaddedBatch::from_sequences(&[vec![3]]).unwrap();
        assert!(matches!(lstm_forward(&p, &batch), Err(Error::Input(_))));
        let mut bad = p.clone();
        bad.bias.pop();
        let ok = PaddedBatch::from_sequences(&[vec![0]]).unwrap();
        assert!(matches!(lstm_forward(&bad, &ok), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = LstmParams::init(4, 3, &mut rng);
        let batch = PaddedBatch::from_sequences(&[vec![0, 1, 2]]).unwrap();
        let out = lstm_forward(&p, &batch).unwrap();
        let mut grads = p.zeros_like();
        lstm_backward(&p, &out, &[vec![0.0; 9]], &mut grads).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }
}

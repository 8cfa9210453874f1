//! Plain-text parameter dump with shape headers.
//!
//! ```text
//! clickstream-checkpoint v1
//! kind s2l
//! meta pooling last
//! tensor lstm.weights 320 85
//! <values>
//! end
//! ```
//!
//! Values use the shortest representation that parses back to the same
//! `f64`, so a save/load cycle is exact.

use std::fmt::Write as _;

use super::params::{DenseParams, LstmParams};
use crate::error::{Error, Result};
use crate::textio::{join_values, Lines};

const MAGIC: &str = "clickstream-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Checkpoint(format!("missing meta `{key}`")))
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.meta(key)?;
        v.parse()
            .map_err(|_| Error::Checkpoint(format!("cannot parse meta `{key}` = `{v}`")))
    }

    pub fn push_tensor(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name: name.to_string(),
            shape,
            data,
        });
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn push_lstm(&mut self, prefix: &str, p: &LstmParams) {
        self.push_tensor(
            &format!("{prefix}.weights"),
            vec![4 * p.hidden_dim, p.row_len()],
            p.weights.clone(),
        );
        self.push_tensor(&format!("{prefix}.bias"), vec![4 * p.hidden_dim], p.bias.clone());
    }

    pub fn lstm(&self, prefix: &str) -> Result<LstmParams> {
        let w = self.tensor(&format!("{prefix}.weights"))?;
        let b = self.tensor(&format!("{prefix}.bias"))?;
        if w.shape.len() != 2 || w.shape[0] % 4 != 0 {
            return Err(Error::Checkpoint(format!("bad shape for `{}`", w.name)));
        }
        let hidden_dim = w.shape[0] / 4;
        let input_dim = w.shape[1]
            .checked_sub(hidden_dim)
            .ok_or_else(|| Error::Checkpoint(format!("bad shape for `{}`", w.name)))?;
        let p = LstmParams {
            input_dim,
            hidden_dim,
            weights: w.data.clone(),
            bias: b.data.clone(),
        };
        p.check_shapes()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(p)
    }

    pub fn push_dense(&mut self, prefix: &str, p: &DenseParams) {
        self.push_tensor(
            &format!("{prefix}.weights"),
            vec![p.output_dim, p.input_dim],
            p.weights.clone(),
        );
        self.push_tensor(&format!("{prefix}.bias"), vec![p.output_dim], p.bias.clone());
    }

    pub fn dense(&self, prefix: &str) -> Result<DenseParams> {
        let w = self.tensor(&format!("{prefix}.weights"))?;
        let b = self.tensor(&format!("{prefix}.bias"))?;
        if w.shape.len() != 2 {
            return Err(Error::Checkpoint(format!("bad shape for `{}`", w.name)));
        }
        let p = DenseParams {
            output_dim: w.shape[0],
            input_dim: w.shape[1],
            weights: w.data.clone(),
            bias: b.data.clone(),
        };
        p.check_shapes()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "kind {}", self.kind).unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        for t in &self.tensors {
            writeln!(out, "tensor {} {}", t.name, join_values(&t.shape)).unwrap();
            writeln!(out, "{}", join_values(&t.data)).unwrap();
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        lines.expect_exact(MAGIC)?;
        let mut ckpt = Checkpoint::new(lines.expect_key("kind")?);
        loop {
            let line = lines.next_line()?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("end") => break,
                Some("meta") => {
                    let key = parts.next().ok_or_else(|| lines.error("meta without key"))?;
                    let value = line
                        .splitn(3, ' ')
                        .nth(2)
                        .unwrap_or("")
                        .to_string();
                    ckpt.meta.push((key.to_string(), value));
                }
                Some("tensor") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| lines.error("tensor without name"))?
                        .to_string();
                    let shape: Vec<usize> =
                        lines.parse_values(&parts.collect::<Vec<_>>().join(" "))?;
                    let expected: usize = shape.iter().product();
                    // Empty tensors have an empty data line, which Lines skips.
                    let data: Vec<f64> = if expected == 0 {
                        Vec::new()
                    } else {
                        let values = lines.next_line()?;
                        lines.parse_values(values)?
                    };
                    if data.len() != expected {
                        return Err(lines.error(format!(
                            "tensor `{name}` has {} values, shape needs {expected}",
                            data.len()
                        )));
                    }
                    ckpt.tensors.push(Tensor { name, shape, data });
                }
                _ => return Err(lines.error(format!("unexpected line `{line}`"))),
            }
        }
        Ok(ckpt)
    }
}

//! Line-oriented helpers for the plain-text model formats.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Iterates over non-empty lines while tracking line numbers for errors.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint(format!("line {}: {}", self.last, message.into()))
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        for (idx, line) in self.inner.by_ref() {
            self.last = idx + 1;
            if !line.trim().is_empty() {
                return Ok(line);
            }
        }
        Err(Error::Checkpoint("unexpected end of input".into()))
    }

    /// Reads `key value...` and returns the value part.
    pub fn expect_key(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            None if line == key => Ok(""),
            _ => Err(self.error(format!("expected `{key}`, found `{line}`"))),
        }
    }

    pub fn expect_parsed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let value = self.expect_key(key)?;
        value
            .parse()
            .map_err(|_| self.error(format!("cannot parse `{value}` for `{key}`")))
    }

    pub fn expect_exact(&mut self, expected: &str) -> Result<()> {
        let line = self.next_line()?;
        if line.trim() == expected {
            Ok(())
        } else {
            Err(self.error(format!("expected `{expected}`, found `{line}`")))
        }
    }

    pub fn parse_values<T: FromStr>(&self, text: &str) -> Result<Vec<T>> {
        text.split_whitespace()
            .map(|v| {
                v.parse()
                    .map_err(|_| self.error(format!("cannot parse value `{v}`")))
            })
            .collect()
    }
}

/// Space-separated shortest round-trip representation.
pub(crate) fn join_values<T: std::fmt::Display>(values: &[T]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&v.to_string());
    }
    out
}

use crate::error::{Error, Result};
use crate::session::{EventCategory, NUM_SYMBOLS};

/// Largest k-gram size whose ranks fit comfortably in a `u64`.
const MAX_K: usize = 20;

/// Ordinal code (1..=5) for each session symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeBook {
    codes: [u64; NUM_SYMBOLS],
}

impl Default for CodeBook {
    /// view=1, click=2, detail=3, add-to-cart=4, remove-from-cart=5.
    fn default() -> Self {
        Self {
            codes: [1, 2, 3, 4, 5],
        }
    }
}

impl CodeBook {
    /// Codes are positions (starting at 1) in `order`, which must list each symbol once.
    pub fn from_order(order: &[EventCategory]) -> Result<Self> {
        let mut codes = [0u64; NUM_SYMBOLS];
        if order.len() != NUM_SYMBOLS {
            return Err(Error::Config(format!(
                "code-book needs {NUM_SYMBOLS} categories, got {}",
                order.len()
            )));
        }
        for (pos, cat) in order.iter().enumerate() {
            let idx = cat
                .symbol_index()
                .ok_or_else(|| Error::Config("`buy` cannot be in the code-book".into()))?;
            if codes[idx] != 0 {
                return Err(Error::Config(format!("`{cat}` listed twice in code-book")));
            }
            codes[idx] = pos as u64 + 1;
        }
        Ok(Self { codes })
    }

    /// Categories in code order.
    pub fn order(&self) -> Vec<EventCategory> {
        let mut cats = EventCategory::SYMBOLS.to_vec();
        cats.sort_by_key(|c| self.codes[c.symbol_index().expect("non-buy")]);
        cats
    }

    pub fn code(&self, category: EventCategory) -> Result<u64> {
        category
            .symbol_index()
            .map(|i| self.codes[i])
            .ok_or_else(|| Error::Input("`buy` has no code".into()))
    }
}

/// Positive integer series built from a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericSeries(pub Vec<u64>);

impl std::ops::Deref for NumericSeries {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.0
    }
}

/// k=1 maps each symbol to its code; k>1 maps each overlapping k-gram to its
/// lexicographic rank (in code order) among all `5^k` k-grams, plus one.
pub fn encode_series(symbols: &[EventCategory], k: usize, codebook: &CodeBook) -> Result<NumericSeries> {
    if k == 0 || k > MAX_K {
        return Err(Error::Input(format!("k must be in 1..={MAX_K}, got {k}")));
    }
    if symbols.len() < k {
        return Err(Error::Input(format!(
            "session of length {} is shorter than k = {k}",
            symbols.len()
        )));
    }
    let digits = symbols
        .iter()
        .map(|&c| codebook.code(c).map(|code| code - 1))
        .collect::<Result<Vec<u64>>>()?;
    let base = NUM_SYMBOLS as u64;
    let values = digits
        .windows(k)
        .map(|w| w.iter().fold(0u64, |acc, &d| acc * base + d) + 1)
        .collect();
    Ok(NumericSeries(values))
}

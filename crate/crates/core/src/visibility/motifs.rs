use std::collections::HashMap;

use super::hvg::{hvg, HvgGraph};
use crate::error::{Error, Result};

/// Largest window whose non-backbone pairs fit in a `u64` mask.
const MAX_WINDOW: usize = 11;

/// Distinct HVG edge patterns on `window` consecutive nodes, in canonical
/// order: fewer edges first, then lexicographic by extra-edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifCatalog {
    window: usize,
    patterns: Vec<u64>,
    index: HashMap<u64, usize>,
}

/// Bit positions for non-adjacent pairs `(i, j)`, `j >= i + 2`.
fn extra_pairs(window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..window {
        for j in i + 2..window {
            pairs.push((i, j));
        }
    }
    pairs
}

fn pattern_mask(graph: &HvgGraph, offset: usize, pairs: &[(usize, usize)]) -> u64 {
    pairs.iter().enumerate().fold(0u64, |mask, (bit, &(i, j))| {
        if graph.has_edge(offset + i, offset + j) {
            mask | (1 << bit)
        } else {
            mask
        }
    })
}

impl MotifCatalog {
    /// Builds a catalog from explicit masks; used when reloading a pipeline.
    pub fn from_patterns(window: usize, patterns: Vec<u64>) -> Result<Self> {
        if !(2..=MAX_WINDOW).contains(&window) {
            return Err(Error::Input(format!("window must be in 2..={MAX_WINDOW}")));
        }
        let limit = extra_pairs(window).len();
        let mut index = HashMap::with_capacity(patterns.len());
        for (i, &p) in patterns.iter().enumerate() {
            if limit < 64 && p >> limit != 0 {
                return Err(Error::Input(format!("pattern {p:#x} too wide for window {window}")));
            }
            if index.insert(p, i).is_some() {
                return Err(Error::Input(format!("duplicate pattern {p:#x}")));
            }
        }
        Ok(Self {
            window,
            patterns,
            index,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[u64] {
        &self.patterns
    }

    pub fn position(&self, pattern: u64) -> Option<usize> {
        self.index.get(&pattern).copied()
    }

    /// Non-backbone edges of pattern `p`.
    pub fn extra_edges(&self, p: usize) -> Vec<(usize, usize)> {
        let mask = self.patterns[p];
        extra_pairs(self.window)
            .into_iter()
            .enumerate()
            .filter(|(bit, _)| mask >> bit & 1 == 1)
            .map(|(_, e)| e)
            .collect()
    }

    /// `path` or e.g. `path+0-2+0-3`.
    pub fn name(&self, p: usize) -> String {
        let mut name = String::from("path");
        for (i, j) in self.extra_edges(p) {
            name.push_str(&format!("+{i}-{j}"));
        }
        name
    }

    /// Index of the pattern induced on `graph` at nodes `offset..offset + window`.
    pub fn classify_window(&self, graph: &HvgGraph, offset: usize) -> Result<usize> {
        let mask = pattern_mask(graph, offset, &extra_pairs(self.window));
        self.position(mask)
            .ok_or_else(|| Error::Input(format!("edge pattern {mask:#x} not in catalog")))
    }
}

/// Exhaustive enumeration over all `value_range^window` integer series.
pub fn enumerate_admissible_motifs(window: usize, value_range: usize) -> Result<MotifCatalog> {
    if !(2..=MAX_WINDOW).contains(&window) {
        return Err(Error::Input(format!("window must be in 2..={MAX_WINDOW}")));
    }
    if value_range == 0 {
        return Err(Error::Input("value range must be positive".into()));
    }
    let total = (value_range as u64)
        .checked_pow(window as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::Input("enumeration too large".into()))?;
    let pairs = extra_pairs(window);
    let mut seen = std::collections::BTreeSet::new();
    let mut values = vec![0u64; window];
    for code in 0..total {
        let mut c = code;
        for v in values.iter_mut().rev() {
            *v = c % value_range as u64 + 1;
            c /= value_range as u64;
        }
        let g = hvg(&values)?;
        seen.insert(pattern_mask(&g, 0, &pairs));
    }
    let edge_list = |m: u64| -> Vec<(usize, usize)> {
        pairs
            .iter()
            .enumerate()
            .filter(|(bit, _)| m >> bit & 1 == 1)
            .map(|(_, &e)| e)
            .collect()
    };
    let mut patterns: Vec<u64> = seen.into_iter().collect();
    patterns.sort_by_key(|&m| (m.count_ones(), edge_list(m)));
    MotifCatalog::from_patterns(window, patterns)
}

/// Motif frequencies plus degree statistics of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub motif_profile: Vec<f64>,
    pub mean_degree: f64,
    pub max_degree: f64,
    /// Population variance.
    pub degree_variance: f64,
    /// Length of the series the graph was built from.
    pub length: f64,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.motif_profile.len() + 4
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.motif_profile.clone();
        v.extend([self.mean_degree, self.max_degree, self.degree_variance, self.length]);
        v
    }

    /// Column names matching `to_vec`.
    pub fn names(catalog: &MotifCatalog) -> Vec<String> {
        let mut names: Vec<String> = (0..catalog.len())
            .map(|p| format!("motif_{}", catalog.name(p)))
            .collect();
        names.extend(
            ["mean_degree", "max_degree", "degree_variance", "length"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }
}

pub fn motif_profile(series: &[u64], catalog: &MotifCatalog) -> Result<FeatureVector> {
    let w = catalog.window();
    if series.len() < w {
        return Err(Error::Input(format!(
            "series of length {} is shorter than the motif window {w}",
            series.len()
        )));
    }
    let graph = hvg(series)?;
    let mut counts = vec![0usize; catalog.len()];
    let windows = series.len() - w + 1;
    for offset in 0..windows {
        counts[catalog.classify_window(&graph, offset)?] += 1;
    }
    let motif_profile = counts.iter().map(|&c| c as f64 / windows as f64).collect();

    let degrees = graph.degrees();
    let n = degrees.len() as f64;
    let mean = degrees.iter().sum::<usize>() as f64 / n;
    let max = *degrees.iter().max().expect("non-empty") as f64;
    let var = degrees.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(FeatureVector {
        motif_profile,
        mean_degree: mean,
        max_degree: max,
        degree_variance: var,
        length: n,
    })
}

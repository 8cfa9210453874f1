use crate::error::{Error, Result};

/// Undirected graph on series indices; `edges` is sorted with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HvgGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl HvgGraph {
    fn from_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self { n, edges }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).is_ok()
    }
}

/// Horizontal visibility graph in one left-to-right pass.
///
/// The stack holds indices still visible from the right, with strictly
/// decreasing values. A new value links to every lower entry it pops, then
/// to the first entry that is at least as high; an equal entry is popped
/// too, since it can no longer see past the new point.
pub fn hvg<T: PartialOrd>(values: &[T]) -> Result<HvgGraph> {
    if values.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    let mut edges = Vec::with_capacity(2 * values.len());
    let mut stack: Vec<usize> = Vec::new();
    for (j, x) in values.iter().enumerate() {
        while let Some(&top) = stack.last() {
            if values[top] < *x {
                edges.push((top, j));
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(&top) = stack.last() {
            edges.push((top, j));
            if values[top] == *x {
                stack.pop();
            }
        }
        stack.push(j);
    }
    Ok(HvgGraph::from_edges(values.len(), edges))
}

/// Direct check of every pair against every intermediate value.
pub fn hvg_bruteforce<T: PartialOrd>(values: &[T]) -> Result<HvgGraph> {
    if values.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    let n = values.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if (i + 1..j).all(|k| values[k] < values[i] && values[k] < values[j]) {
                edges.push((i, j));
            }
        }
    }
    Ok(HvgGraph::from_edges(n, edges))
}

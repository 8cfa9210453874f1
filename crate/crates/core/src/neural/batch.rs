use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Reserved token index for padded positions.
pub const PAD: usize = usize::MAX;

/// Right-padded token matrix with a leading-ones mask per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedBatch {
    pub max_len: usize,
    pub lengths: Vec<usize>,
    /// Row-major `batch x max_len`; padded positions hold [`PAD`].
    pub tokens: Vec<usize>,
    /// Row-major `batch x max_len`; 1 for real positions.
    pub mask: Vec<u8>,
}

impl PaddedBatch {
    pub fn from_sequences<S: AsRef<[usize]>>(seqs: &[S]) -> Result<Self> {
        let max_len = seqs.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        Self::with_max_len(seqs, max_len)
    }

    /// Pads every row to `max_len`, which may exceed the longest sequence.
    pub fn with_max_len<S: AsRef<[usize]>>(seqs: &[S], max_len: usize) -> Result<Self> {
        let mut tokens = Vec::with_capacity(seqs.len() * max_len);
        let mut mask = Vec::with_capacity(seqs.len() * max_len);
        let mut lengths = Vec::with_capacity(seqs.len());
        for s in seqs {
            let s = s.as_ref();
            if s.len() > max_len {
                return Err(Error::Shape(format!(
                    "sequence of length {} exceeds max_len {max_len}",
                    s.len()
                )));
            }
            if s.contains(&PAD) {
                return Err(Error::Input("PAD inside a sequence".into()));
            }
            tokens.extend_from_slice(s);
            tokens.extend(std::iter::repeat_n(PAD, max_len - s.len()));
            mask.extend(std::iter::repeat_n(1u8, s.len()));
            mask.extend(std::iter::repeat_n(0u8, max_len - s.len()));
            lengths.push(s.len());
        }
        Ok(Self {
            max_len,
            lengths,
            tokens,
            mask,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    /// Real (unpadded) tokens of row `b`.
    pub fn row(&self, b: usize) -> &[usize] {
        let start = b * self.max_len;
        &self.tokens[start..start + self.lengths[b]]
    }

    pub fn mask_row(&self, b: usize) -> &[u8] {
        &self.mask[b * self.max_len..(b + 1) * self.max_len]
    }
}

/// Groups example indices into batches of similar length.
///
/// Indices are shuffled, stably sorted by length, cut into consecutive
/// batches, and the batch order is shuffled again.
pub fn batch_plan<R: Rng>(lengths: &[usize], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mask_has_leading_ones() {
        let batch = PaddedBatch::from_sequences(&[vec![1, 2, 3], vec![4]]).unwrap();
        assert_eq!(batch.max_len, 3);
        assert_eq!(batch.mask_row(1), &[1, 0, 0]);
        assert_eq!(batch.tokens[3..], [4, PAD, PAD]);
        assert_eq!(batch.row(0), &[1, 2, 3]);
        assert!(PaddedBatch::with_max_len(&[vec![1, 2]], 1).is_err());
    }

    #[test]
    fn plan_covers_every_index_once() {
        let lengths: Vec<usize> = (0..53).map(|i| 10 + (i * 7) % 31).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = batch_plan(&lengths, 10, &mut rng);
        let mut seen: Vec<usize> = plan.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..53).collect::<Vec<_>>());
        assert!(plan.iter().all(|b| b.len() <= 10));
    }
}

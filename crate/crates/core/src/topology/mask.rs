use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// A synapse address: (presynaptic index, postsynaptic index).
pub type Synapse = (usize, usize);

/// Binary connectivity of one layer.
///
/// Stored as a row-major bitmap over the `n_pre x n_post` grid, so iteration
/// order is lexicographic in `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMask {
    n_pre: usize,
    n_post: usize,
    bits: Vec<bool>,
    count: usize,
}

impl SparseMask {
    pub fn empty(n_pre: usize, n_post: usize) -> Self {
        Self {
            n_pre,
            n_post,
            bits: vec![false; n_pre * n_post],
            count: 0,
        }
    }

    pub fn dense(n_pre: usize, n_post: usize) -> Self {
        Self {
            n_pre,
            n_post,
            bits: vec![true; n_pre * n_post],
            count: n_pre * n_post,
        }
    }

    /// Builds a mask from an explicit list of active synapses.
    pub fn from_pairs<I>(n_pre: usize, n_post: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = Synapse>,
    {
        let mut mask = Self::empty(n_pre, n_post);
        for (i, j) in pairs {
            if i >= n_pre || j >= n_post {
                return Err(Error::invalid(format!(
                    "synapse ({i}, {j}) outside {n_pre}x{n_post} mask"
                )));
            }
            if !mask.insert(i, j) {
                return Err(Error::invalid(format!("duplicate synapse ({i}, {j})")));
            }
        }
        Ok(mask)
    }

    pub(crate) fn from_bits(n_pre: usize, n_post: usize, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), n_pre * n_post);
        let count = bits.iter().filter(|&&b| b).count();
        Self {
            n_pre,
            n_post,
            bits,
            count,
        }
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn len(&self) -> usize {
        self.n_pre * self.n_post
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cardinality(&self) -> usize {
        self.count
    }

    pub fn inactive_count(&self) -> usize {
        self.len() - self.count
    }

    pub fn density(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.count as f64 / self.len() as f64
        }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n_post + j]
    }

    /// Raw row-major bitmap.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Returns `true` if the synapse was newly activated.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        let slot = &mut self.bits[i * self.n_post + j];
        if *slot {
            false
        } else {
            *slot = true;
            self.count += 1;
            true
        }
    }

    /// Returns `true` if the synapse was active.
    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        let slot = &mut self.bits[i * self.n_post + j];
        if *slot {
            *slot = false;
            self.count -= 1;
            true
        } else {
            false
        }
    }

    /// Active synapses in lexicographic order.
    pub fn active(&self) -> impl Iterator<Item = Synapse> + '_ {
        let n_post = self.n_post;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n_post, k % n_post))
    }

    /// Inactive synapses in lexicographic order.
    pub fn inactive(&self) -> impl Iterator<Item = Synapse> + '_ {
        let n_post = self.n_post;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(move |(k, _)| (k / n_post, k % n_post))
    }

    /// Number of active synapses feeding postsynaptic unit `j`.
    pub fn fan_in(&self, j: usize) -> usize {
        (0..self.n_pre).filter(|&i| self.contains(i, j)).count()
    }

    /// `W := M ⊙ W`.
    pub fn apply(&self, weights: &mut Matrix) {
        debug_assert_eq!(weights.rows() * weights.cols(), self.bits.len());
        weights
            .as_mut_slice()
            .iter_mut()
            .zip(&self.bits)
            .filter(|(_, &b)| !b)
            .for_each(|(w, _)| *w = 0.0);
    }

    pub(crate) fn check_shape(&self, weights: &Matrix) -> Result<()> {
        if weights.rows() != self.n_pre || weights.cols() != self.n_post {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.n_pre, self.n_post),
                actual: format!("{}x{}", weights.rows(), weights.cols()),
            });
        }
        Ok(())
    }

    /// Serializes as: layer id, `n_pre`, `n_post`, active count, then the
    /// sorted `(i, j)` list. All fields little-endian `u64`.
    pub fn to_bytes(&self, layer_id: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 16 * self.count);
        for v in [layer_id, self.n_pre, self.n_post, self.count] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for (i, j) in self.active() {
            out.extend_from_slice(&(i as u64).to_le_bytes());
            out.extend_from_slice(&(j as u64).to_le_bytes());
        }
        out
    }

    /// Inverse of [`SparseMask::to_bytes`]; returns the layer id and mask.
    pub fn from_bytes(bytes: &[u8]) -> Result<(usize, Self)> {
        let mut words = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")) as usize);
        if bytes.len() % 8 != 0 || bytes.len() < 32 {
            return Err(Error::Corrupt("mask record length".into()));
        }
        let layer_id = words.next().unwrap_or_default();
        let n_pre = words.next().unwrap_or_default();
        let n_post = words.next().unwrap_or_default();
        let count = words.next().unwrap_or_default();
        if bytes.len() != 32 + 16 * count {
            return Err(Error::Corrupt(format!(
                "mask record declares {count} synapses but holds {} bytes",
                bytes.len()
            )));
        }
        let mut mask = Self::empty(n_pre, n_post);
        let mut prev: Option<Synapse> = None;
        for _ in 0..count {
            let i = words.next().unwrap_or_default();
            let j = words.next().unwrap_or_default();
            if i >= n_pre || j >= n_post || prev.is_some_and(|p| p >= (i, j)) {
                return Err(Error::Corrupt(format!("mask synapse ({i}, {j})")));
            }
            mask.insert(i, j);
            prev = Some((i, j));
        }
        Ok((layer_id, mask))
    }
}

/// Tracks which synapses have ever been active since initialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EverActive {
    bits: Vec<bool>,
}

impl EverActive {
    pub fn new(mask: &SparseMask) -> Self {
        Self {
            bits: mask.bits().to_vec(),
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn mark(&mut self, mask: &SparseMask) {
        self.bits
            .iter_mut()
            .zip(mask.bits())
            .for_each(|(seen, &now)| *seen |= now);
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

//! Frequency superimposed-coding signatures.
//!
//! A `B`-bit array is cut into `u` contiguous blocks. Terms are grouped by
//! descending historical frequency into `u` groups of roughly equal
//! aggregate frequency, and group `i` gets a block of `(xi_i / xi) * B`
//! bits. Each term sets `m` hashed bits inside its own group's block, so
//! rare terms never dilute the bits used by frequent ones.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::model::TermId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureConfig {
    /// Signature width in bits.
    pub bits: u32,
    /// Number of frequency blocks.
    pub blocks: u32,
    /// Hash functions per term.
    pub hashes: u32,
    pub seed: u64,
}

impl Default for SignatureConfig {
    fn default() -> Self {
        Self { bits: 512, blocks: 8, hashes: 2, seed: 0x5eed_5167_0000_0001 }
    }
}

impl SignatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.bits < self.blocks {
            return Err(Error::Usage(format!(
                "signature width B={} must be at least the block count u={} (u >= 1)",
                self.bits, self.blocks
            )));
        }
        if self.hashes == 0 {
            return Err(Error::Usage("hash count m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Historical keyword frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<TermId, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: TermId, count: u64) {
        *self.counts.entry(term).or_default() += count;
        self.total += count;
    }

    pub fn observe(&mut self, terms: &[TermId]) {
        for &t in terms {
            self.add(t, 1);
        }
    }

    pub fn count(&self, term: TermId) -> u64 {
        self.counts.get(&term).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }
}

impl FromIterator<(TermId, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (TermId, u64)>>(iter: I) -> Self {
        let mut table = Self::new();
        for (t, c) in iter {
            table.add(t, c);
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    width: u32,
    offsets: Vec<u32>,
    sizes: Vec<u32>,
    term_block: HashMap<TermId, u32>,
    default_block: u32,
}

impl BlockLayout {
    /// Single block covering the whole signature; every term lands in it.
    pub fn single_block(width: u32) -> Self {
        Self { width, offsets: vec![0], sizes: vec![width], term_block: HashMap::new(), default_block: 0 }
    }

    /// Frequency-partitioned layout.
    ///
    /// Terms sorted by descending frequency (ties by ascending id) are cut
    /// greedily into contiguous groups: a group closes once its own sum
    /// reaches `xi / u`, or when the remaining terms are just enough to
    /// give each remaining group one term. Block widths are proportional to
    /// group frequency, rounded by largest remainder, at least one bit each.
    pub fn build(freq: &FrequencyTable, cfg: &SignatureConfig) -> Result<Self> {
        cfg.validate()?;
        if freq.total() == 0 {
            return Ok(Self::single_block(cfg.bits));
        }

        let mut terms: Vec<(TermId, u64)> = freq.iter().collect();
        terms.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let blocks = (cfg.blocks as usize).min(terms.len());
        let target = freq.total() as f64 / blocks as f64;
        let mut groups: Vec<u64> = Vec::with_capacity(blocks);
        let mut term_block = HashMap::with_capacity(terms.len());
        let mut it = terms.iter().enumerate().peekable();
        for g in 0..blocks {
            let last = g + 1 == blocks;
            let mut sum = 0u64;
            while let Some(&(i, &(term, count))) = it.peek() {
                let remaining_after = terms.len() - i - 1;
                let groups_after = blocks - g - 1;
                if !last && sum > 0 && (sum as f64 >= target || remaining_after < groups_after) {
                    break;
                }
                term_block.insert(term, g as u32);
                sum += count;
                it.next();
                if !last && (sum as f64 >= target || remaining_after == groups_after) {
                    break;
                }
            }
            groups.push(sum);
        }

        let sizes = proportional_sizes(&groups, freq.total(), cfg.bits);
        let offsets = sizes
            .iter()
            .scan(0u32, |acc, &s| {
                let off = *acc;
                *acc += s;
                Some(off)
            })
            .collect();
        Ok(Self { width: cfg.bits, offsets, sizes, term_block, default_block: blocks as u32 - 1 })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn block_offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub fn default_block(&self) -> u32 {
        self.default_block
    }

    /// Block of `term`; unseen terms go to the lowest-frequency block.
    pub fn block_of(&self, term: TermId) -> u32 {
        self.term_block.get(&term).copied().unwrap_or(self.default_block)
    }

    pub fn block_range(&self, block: u32) -> std::ops::Range<u32> {
        let b = block as usize;
        self.offsets[b]..self.offsets[b] + self.sizes[b]
    }

    /// Bit positions set by `term`; may repeat.
    pub fn term_bit_positions(&self, term: TermId, cfg: &SignatureConfig) -> Vec<u32> {
        let mut out = Vec::with_capacity(cfg.hashes as usize);
        self.for_each_position(term, cfg, |p| out.push(p));
        out
    }

    fn for_each_position(&self, term: TermId, cfg: &SignatureConfig, mut f: impl FnMut(u32)) {
        let block = self.block_of(term) as usize;
        let (offset, size) = (self.offsets[block], self.sizes[block] as u64);
        let key = term.0.to_le_bytes();
        for i in 0..cfg.hashes {
            let h = xxh3_64_with_seed(&key, hash_seed(cfg.seed, i));
            f(offset + (h % size) as u32);
        }
    }

    /// Signature of a keyword set: every position of every term set.
    pub fn signature(&self, terms: &[TermId], cfg: &SignatureConfig) -> Signature {
        let mut sig = Signature::zeros(self.width);
        for &t in terms {
            self.for_each_position(t, cfg, |p| sig.set(p));
        }
        sig
    }
}

// i-th hash function: seed mixed with i through splitmix64's finalizer.
fn hash_seed(seed: u64, i: u32) -> u64 {
    let mut z = seed ^ (u64::from(i) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Largest-remainder apportionment of `width` bits to `weights`, with every
/// share at least one bit. Requires `width >= weights.len()`.
fn proportional_sizes(weights: &[u64], total: u64, width: u32) -> Vec<u32> {
    let exact: Vec<f64> = weights.iter().map(|&w| w as f64 / total as f64 * f64::from(width)).collect();
    let mut sizes: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let mut left = width - sizes.iter().sum::<u32>();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    // Borrow a bit from the widest block for any block rounded down to zero.
    while let Some(zero) = sizes.iter().position(|&s| s == 0) {
        let widest = (0..sizes.len()).max_by_key(|&i| (sizes[i], usize::MAX - i)).unwrap();
        sizes[widest] -= 1;
        sizes[zero] += 1;
    }
    sizes
}

/// Fixed-width bit array.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    width: u32,
    words: Box<[u64]>,
}

impl Signature {
    pub fn zeros(width: u32) -> Self {
        Self { width, words: vec![0; width.div_ceil(64) as usize].into_boxed_slice() }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn set(&mut self, bit: u32) {
        debug_assert!(bit < self.width);
        self.words[(bit / 64) as usize] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: u32) -> bool {
        bit < self.width && self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    fn check_width(&self, other: &Signature) -> Result<()> {
        if self.width != other.width {
            return Err(Error::Invariant(format!("signature width mismatch: {} vs {}", self.width, other.width)));
        }
        Ok(())
    }

    /// Bitwise OR.
    pub fn superimpose(&self, other: &Signature) -> Result<Signature> {
        let mut out = self.clone();
        out.superimpose_in_place(other)?;
        Ok(out)
    }

    pub fn superimpose_in_place(&mut self, other: &Signature) -> Result<()> {
        self.check_width(other)?;
        self.or_unchecked(other);
        Ok(())
    }

    /// `true` iff every bit set in `self` is also set in `node`.
    pub fn subset_of(&self, node: &Signature) -> Result<bool> {
        self.check_width(node)?;
        Ok(self.subset_unchecked(node))
    }

    #[inline]
    pub(crate) fn or_unchecked(&mut self, other: &Signature) {
        debug_assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
    }

    #[inline]
    pub(crate) fn subset_unchecked(&self, node: &Signature) -> bool {
        debug_assert_eq!(self.width, node.width);
        self.words.iter().zip(node.words.iter()).all(|(q, n)| q & n == *q)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}b:", self.width)?;
        for b in 0..self.width {
            f.write_str(if self.get(b) { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A `b`-bit vector. Bit 0 is the most significant bit of the first word, so
/// comparing word slices compares bit strings lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    bits: usize,
    words: Vec<u64>,
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl Signature {
    pub fn zeros(bits: usize) -> Self {
        Self {
            bits,
            words: vec![0; words_for(bits)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    pub(crate) fn from_words(bits: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(bits));
        Self { bits, words }
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (63 - i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.bits != other.bits {
            return Err(Error::DimensionMismatch {
                expected: self.bits,
                actual: other.bits,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Bit `j` of the result is bit `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[u32]) -> Self {
        let mut out = Self::zeros(self.bits);
        for (j, &src) in perm.iter().enumerate() {
            if self.get(src as usize) {
                out.words[j / 64] |= 1u64 << (63 - j % 64);
            }
        }
        out
    }

    /// Packed 8 bits per byte, most significant bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.bits.div_ceil(8);
        self.words.iter().flat_map(|w| w.to_be_bytes()).take(n).collect()
    }

    /// Inverse of [`Self::to_bytes`]. Padding bits must be zero.
    pub fn from_bytes(bits: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != bits.div_ceil(8) {
            return None;
        }
        let mut words = vec![0u64; words_for(bits)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= u64::from(b) << (56 - 8 * (i % 8));
        }
        let s = Self { bits, words };
        let pad = bits % 64;
        if pad != 0 && s.words[s.words.len() - 1] << pad != 0 {
            return None;
        }
        Some(s)
    }
}

impl PartialOrd for Signature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Signature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.words.cmp(&other.words).then(self.bits.cmp(&other.bits))
    }
}

/// `1 − cos(π · hamming / b)`.
pub fn approx_cosine_distance(s1: &Signature, s2: &Signature) -> Result<f64> {
    let h = s1.hamming(s2)?;
    if s1.bits == 0 {
        return Err(Error::InvalidInput("empty signatures".into()));
    }
    let theta = std::f64::consts::PI * h as f64 / s1.bits as f64;
    Ok(1.0 - theta.cos())
}

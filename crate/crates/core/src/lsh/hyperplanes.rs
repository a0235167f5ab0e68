use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::rng::CounterNormal;

use super::Signature;

/// `b × d` matrix of standard normals.
///
/// Entry `(i, j)` is value `i·d + j` of a [`CounterNormal`] keyed by the seed,
/// so the first rows are shared by every longer set with the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneSet {
    bits: usize,
    dim: usize,
    seed: u64,
    normals: Vec<f64>,
}

pub fn sample_hyperplanes(dim: usize, bits: usize, seed: u64) -> Result<HyperplaneSet> {
    if dim == 0 || bits == 0 {
        return Err(Error::InvalidConfig(format!("hyperplanes need d >= 1 and b >= 1, got d={dim} b={bits}")));
    }
    let src = CounterNormal::new(seed);
    let n = dim
        .checked_mul(bits)
        .ok_or_else(|| Error::InvalidConfig("hyperplane matrix too large".into()))?;
    let normals = (0..n as u64).map(|k| src.sample(k)).collect();
    Ok(HyperplaneSet {
        bits,
        dim,
        seed,
        normals,
    })
}

impl HyperplaneSet {
    /// Wraps an explicit row-major `bits × dim` matrix.
    pub fn from_normals(dim: usize, bits: usize, normals: Vec<f64>) -> Result<Self> {
        if dim == 0 || bits == 0 || normals.len() != dim * bits {
            return Err(Error::InvalidConfig(format!(
                "{} values for a {bits}x{dim} hyperplane matrix",
                normals.len()
            )));
        }
        Ok(Self {
            bits,
            dim,
            seed: 0,
            normals,
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.normals
    }

    /// Bit `i` is 1 iff `r_i · x ≥ 0`.
    pub fn signature(&self, x: &[f64]) -> Result<Signature> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::NumericDomain("signature of the zero vector".into()));
        }
        let mut sig = Signature::zeros(self.bits);
        for i in 0..self.bits {
            let p: f64 = self.row(i).iter().zip(x).map(|(r, v)| r * v).sum();
            if p >= 0.0 {
                sig.set(i, true);
            }
        }
        Ok(sig)
    }
}

pub fn signature(x: &Embedding, hyperplanes: &HyperplaneSet) -> Result<Signature> {
    hyperplanes.signature(x)
}

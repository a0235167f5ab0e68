//! Permuted sorted signature lists and beamwidth-limited lookup.

use std::cmp::Ordering;

use rand::Rng;

use super::signature::words_for;
use super::{approx_cosine_distance, sample_hyperplanes, HyperplaneSet, Signature};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

pub const MIN_BITS: usize = 128;
pub const MAX_BITS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexConfig {
    pub bits: usize,
    pub permutations: usize,
    pub beamwidth: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            bits: 1024,
            permutations: 16,
            beamwidth: 2000,
            seed: 0,
        }
    }
}

impl IndexConfig {
    /// Checks the operating ranges accepted from user configuration. The
    /// library functions themselves accept any `b >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(MIN_BITS..=MAX_BITS).contains(&self.bits) {
            return Err(Error::InvalidConfig(format!(
                "bits must lie in {MIN_BITS}..={MAX_BITS}, got {}",
                self.bits
            )));
        }
        if self.permutations == 0 || self.beamwidth == 0 {
            return Err(Error::InvalidConfig("permutations and beamwidth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hyperplane_seed(&self) -> u64 {
        derive_seed(self.seed, "lsh.hyperplanes")
    }
}

/// One lexicographically sorted list: permuted signatures (flat words) and
/// the item id of each entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SortedList {
    pub words: Vec<u64>,
    pub ids: Vec<u32>,
}

impl SortedList {
    fn entry(&self, i: usize, w: usize) -> &[u64] {
        &self.words[i * w..(i + 1) * w]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutedIndex {
    pub(crate) bits: usize,
    pub(crate) seed: u64,
    pub(crate) permutations: Vec<Vec<u32>>,
    pub(crate) lists: Vec<SortedList>,
}

/// `count` permutations of `0..bits`: the identity, then seeded Fisher–Yates
/// shuffles drawn in sequence from one stream, so shorter sets are prefixes
/// of longer ones.
pub fn draw_permutations(bits: usize, count: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = stream(seed, "lsh.permutations");
    let identity: Vec<u32> = (0..bits as u32).collect();
    let mut out = Vec::with_capacity(count);
    for p in 0..count {
        let mut perm = identity.clone();
        if p > 0 {
            for i in (1..bits).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
        }
        out.push(perm);
    }
    out
}

fn sorted_list(signatures: &[Signature], perm: &[u32]) -> SortedList {
    let bits = perm.len();
    let w = words_for(bits);
    let mut permuted = Vec::with_capacity(signatures.len() * w);
    for s in signatures {
        permuted.extend_from_slice(s.permuted(perm).words());
    }
    let mut order: Vec<u32> = (0..signatures.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        permuted[a * w..(a + 1) * w].cmp(&permuted[b * w..(b + 1) * w]).then(a.cmp(&b))
    });
    let mut words = Vec::with_capacity(permuted.len());
    for &id in &order {
        let id = id as usize;
        words.extend_from_slice(&permuted[id * w..(id + 1) * w]);
    }
    SortedList { words, ids: order }
}

/// Builds `cfg.permutations` sorted lists; equal permuted signatures are
/// ordered by ascending item id.
pub fn build_index(signatures: &[Signature], cfg: &IndexConfig) -> Result<PermutedIndex> {
    let Some(first) = signatures.first() else {
        return Err(Error::InvalidInput("cannot index zero signatures".into()));
    };
    let bits = first.len();
    if let Some(bad) = signatures.iter().find(|s| s.len() != bits) {
        return Err(Error::DimensionMismatch {
            expected: bits,
            actual: bad.len(),
        });
    }
    if bits == 0 || cfg.permutations == 0 {
        return Err(Error::InvalidConfig("need b >= 1 and P >= 1".into()));
    }
    if signatures.len() > u32::MAX as usize {
        return Err(Error::InvalidInput("too many items for u32 ids".into()));
    }
    let permutations = draw_permutations(bits, cfg.permutations, cfg.seed);
    let lists = permutations.iter().map(|p| sorted_list(signatures, p)).collect();
    Ok(PermutedIndex {
        bits,
        seed: cfg.seed,
        permutations,
        lists,
    })
}

impl PermutedIndex {
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.lists[0].ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_permutations(&self) -> usize {
        self.permutations.len()
    }

    pub fn permutation(&self, p: usize) -> &[u32] {
        &self.permutations[p]
    }

    /// Entries of sorted list `p` as (permuted signature, item id).
    pub fn sorted_entries(&self, p: usize) -> Vec<(Signature, u32)> {
        let w = words_for(self.bits);
        let list = &self.lists[p];
        (0..list.ids.len())
            .map(|i| (Signature::from_words(self.bits, list.entry(i, w).to_vec()), list.ids[i]))
            .collect()
    }

    /// Unpermuted signature of every item, by id.
    pub fn item_signatures(&self) -> Vec<Signature> {
        let w = words_for(self.bits);
        let list = &self.lists[0];
        let mut out = vec![Signature::zeros(self.bits); list.ids.len()];
        for (i, &id) in list.ids.iter().enumerate() {
            out[id as usize] = Signature::from_words(self.bits, list.entry(i, w).to_vec());
        }
        out
    }

    /// Union over permutations of the `beamwidth` entries before and after the
    /// insertion point of the permuted query, as sorted unique ids.
    pub fn beam_lookup(&self, s: &Signature, beamwidth: usize) -> Result<Vec<u32>> {
        if s.len() != self.bits {
            return Err(Error::DimensionMismatch {
                expected: self.bits,
                actual: s.len(),
            });
        }
        let w = words_for(self.bits);
        let n = self.len();
        let mut out = Vec::with_capacity((2 * beamwidth).min(n) * self.lists.len());
        for (perm, list) in self.permutations.iter().zip(&self.lists) {
            let q = s.permuted(perm);
            let pos = lower_bound(list, w, q.words());
            let lo = pos.saturating_sub(beamwidth);
            let hi = pos.saturating_add(beamwidth).min(n);
            out.extend_from_slice(&list.ids[lo..hi]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// First position whose entry is not less than `q`.
fn lower_bound(list: &SortedList, w: usize, q: &[u64]) -> usize {
    let (mut lo, mut hi) = (0, list.ids.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if list.entry(mid, w).cmp(q) == Ordering::Less {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// How query candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scoring {
    /// Exact cosine distance on the stored unit-length embeddings.
    #[default]
    Exact,
    /// Signature-only: `1 − cos(π · hamming / b)`.
    Hamming,
}

impl std::str::FromStr for Scoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "hamming" => Ok(Self::Hamming),
            other => Err(Error::InvalidConfig(format!("unknown scoring {other:?}"))),
        }
    }
}

/// The searchable collection: hyperplanes, the permuted index and the
/// length-normalized embeddings.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    hyperplanes: HyperplaneSet,
    index: PermutedIndex,
    dim: usize,
    unit: Vec<f64>,
    signatures: Vec<Signature>,
}

fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::NumericDomain(format!("cannot normalize vector with norm {n}")));
    }
    Ok(x.iter().map(|v| v / n).collect())
}

impl SearchIndex {
    pub fn build(embeddings: &[Embedding], cfg: &IndexConfig) -> Result<Self> {
        let dim = embeddings
            .first()
            .map(Embedding::dim)
            .ok_or_else(|| Error::InvalidInput("cannot index zero embeddings".into()))?;
        let hyperplanes = sample_hyperplanes(dim, cfg.bits, cfg.hyperplane_seed())?;
        let signatures = embeddings
            .iter()
            .map(|e| hyperplanes.signature(e))
            .collect::<Result<Vec<_>>>()?;
        let index = build_index(&signatures, cfg)?;
        Self::from_parts(hyperplanes, index, embeddings)
    }

    /// Reassembles a search index from a stored permuted index and the
    /// embeddings it was built from.
    pub fn from_parts(hyperplanes: HyperplaneSet, index: PermutedIndex, embeddings: &[Embedding]) -> Result<Self> {
        if embeddings.len() != index.len() {
            return Err(Error::InvalidInput(format!(
                "{} embeddings for an index of {} items",
                embeddings.len(),
                index.len()
            )));
        }
        if hyperplanes.bits() != index.bits() {
            return Err(Error::DimensionMismatch {
                expected: index.bits(),
                actual: hyperplanes.bits(),
            });
        }
        let dim = hyperplanes.dim();
        let mut unit = Vec::with_capacity(embeddings.len() * dim);
        for e in embeddings {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
            unit.extend(normalize(e)?);
        }
        let signatures = index.item_signatures();
        Ok(Self {
            hyperplanes,
            index,
            dim,
            unit,
            signatures,
        })
    }

    /// Rebuilds the hyperplanes from the index seed and attaches embeddings.
    pub fn load(index: PermutedIndex, embeddings: &[Embedding]) -> Result<Self> {
        let dim = embeddings
            .first()
            .map(Embedding::dim)
            .ok_or_else(|| Error::InvalidInput("no embeddings".into()))?;
        let seed = derive_seed(index.seed(), "lsh.hyperplanes");
        let hyperplanes = sample_hyperplanes(dim, index.bits(), seed)?;
        Self::from_parts(hyperplanes, index, embeddings)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> &PermutedIndex {
        &self.index
    }

    pub fn hyperplanes(&self) -> &HyperplaneSet {
        &self.hyperplanes
    }

    pub fn unit_embedding(&self, id: usize) -> &[f64] {
        &self.unit[id * self.dim..(id + 1) * self.dim]
    }

    /// Candidates from the beam lookup of `q`'s signature, ranked by
    /// ascending distance then id, truncated to `top_k`.
    pub fn query(&self, q: &[f64], beamwidth: usize, top_k: usize, scoring: Scoring) -> Result<Vec<(u32, f64)>> {
        if top_k == 0 {
            return Err(Error::InvalidInput("top_k must be at least 1".into()));
        }
        let sig = self.hyperplanes.signature(q)?;
        let candidates = self.index.beam_lookup(&sig, beamwidth)?;
        let mut scored = Vec::with_capacity(candidates.len());
        match scoring {
            Scoring::Exact => {
                let qu = normalize(q)?;
                for id in candidates {
                    let dot: f64 = self.unit_embedding(id as usize).iter().zip(&qu).map(|(a, b)| a * b).sum();
                    scored.push((id, (1.0 - dot).clamp(0.0, 2.0)));
                }
            }
            Scoring::Hamming => {
                for id in candidates {
                    scored.push((id, approx_cosine_distance(&sig, &self.signatures[id as usize])?));
                }
            }
        }
        scored.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        Ok(scored)
    }

    /// Exhaustive exact-cosine ranking, for reference measurements.
    pub fn exhaustive(&self, q: &[f64], top_k: usize) -> Result<Vec<(u32, f64)>> {
        let qu = normalize(q)?;
        let mut scored: Vec<(u32, f64)> = (0..self.len())
            .map(|id| {
                let dot: f64 = self.unit_embedding(id).iter().zip(&qu).map(|(a, b)| a * b).sum();
                (id as u32, (1.0 - dot).clamp(0.0, 2.0))
            })
            .collect();
        scored.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        Ok(scored)
    }
}

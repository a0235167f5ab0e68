//! Binary files for the permuted index and the stored embeddings.
//!
//! Index (`QBEI`, little-endian): u32 b, u32 P, u32 N, u64 seed, then
//! P permutations of b u32 each, then for every permutation N entries of
//! `ceil(b/8)` signature bytes followed by a u32 item id, in sorted order.
//!
//! Embeddings (`QBEV`): u32 N, u32 d, then N·d f64 values.

use std::path::Path;

use super::index::SortedList;
use super::signature::words_for;
use super::{PermutedIndex, Signature};
use crate::embedding::Embedding;
use crate::error::{Error, FormatError, Result};
use crate::io::Reader;

pub const INDEX_MAGIC: [u8; 4] = *b"QBEI";
pub const EMBEDDINGS_MAGIC: [u8; 4] = *b"QBEV";
const MAX_FILE_BITS: usize = 1 << 16;

fn invalid(context: &str, reason: impl Into<String>) -> FormatError {
    FormatError::Invalid {
        context: context.to_owned(),
        reason: reason.into(),
    }
}

pub fn encode_index(index: &PermutedIndex) -> Vec<u8> {
    let b = index.bits();
    let n = index.len();
    let mut out = Vec::with_capacity(32 + index.num_permutations() * (4 * b + n * (b.div_ceil(8) + 4)));
    out.extend_from_slice(&INDEX_MAGIC);
    for v in [b, index.num_permutations(), n] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&index.seed().to_le_bytes());
    for perm in &index.permutations {
        for &v in perm {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for p in 0..index.num_permutations() {
        for (sig, id) in index.sorted_entries(p) {
            out.extend_from_slice(&sig.to_bytes());
            out.extend_from_slice(&id.to_le_bytes());
        }
    }
    out
}

/// Decodes an index file, checking that every list is a sorted arrangement
/// of the same N signatures under its permutation.
pub fn decode_index(bytes: &[u8]) -> Result<PermutedIndex, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(INDEX_MAGIC)?;
    let b = r.u32("index bits")? as usize;
    let p = r.u32("index permutations")? as usize;
    let n = r.u32("index items")? as usize;
    let seed = r.u64("index seed")?;
    if b == 0 || b > MAX_FILE_BITS {
        return Err(invalid("index header", format!("bits {b} out of range")));
    }
    if p == 0 || n == 0 {
        return Err(invalid("index header", "permutations and items must be non-zero"));
    }
    let sig_bytes = b.div_ceil(8);
    let needed = (p as u128) * (4 * b as u128 + n as u128 * (sig_bytes as u128 + 4));
    if needed != r.remaining() as u128 {
        if needed > r.remaining() as u128 {
            return Err(FormatError::Truncated {
                context: "index body".into(),
            });
        }
        return Err(FormatError::TrailingBytes(r.remaining() - needed as usize));
    }

    let mut permutations = Vec::with_capacity(p);
    for _ in 0..p {
        let mut perm = Vec::with_capacity(b);
        let mut seen = vec![false; b];
        for _ in 0..b {
            let v = r.u32("permutation")?;
            let Some(slot) = seen.get_mut(v as usize).filter(|s| !**s) else {
                return Err(invalid("permutation", "not a permutation of 0..b"));
            };
            *slot = true;
            perm.push(v);
        }
        permutations.push(perm);
    }

    // Unpermuted signature of each item, taken from the first list and checked
    // against every other.
    let w = words_for(b);
    let mut items: Vec<Option<Signature>> = vec![None; n];
    let mut lists = Vec::with_capacity(p);
    for perm in &permutations {
        let mut inverse = vec![0u32; b];
        for (j, &src) in perm.iter().enumerate() {
            inverse[src as usize] = j as u32;
        }
        let mut words = Vec::with_capacity(n * w);
        let mut ids = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut prev: Option<(Signature, u32)> = None;
        for _ in 0..n {
            let raw = r.take(sig_bytes, "index signature")?;
            let sig = Signature::from_bytes(b, raw).ok_or_else(|| invalid("index signature", "non-zero padding bits"))?;
            let id = r.u32("index id")?;
            let Some(slot) = seen.get_mut(id as usize).filter(|s| !**s) else {
                return Err(invalid("index id", format!("id {id} out of range or repeated")));
            };
            *slot = true;
            if let Some((ps, pid)) = &prev {
                if (ps, *pid) >= (&sig, id) {
                    return Err(invalid("index list", "entries are not in sorted order"));
                }
            }
            let original = sig.permuted(&inverse);
            match &items[id as usize] {
                Some(known) if *known != original => {
                    return Err(invalid("index list", format!("item {id} differs between permutations")));
                }
                Some(_) => {}
                None => items[id as usize] = Some(original),
            }
            words.extend_from_slice(sig.words());
            ids.push(id);
            prev = Some((sig, id));
        }
        lists.push(SortedList { words, ids });
    }
    r.finish()?;
    Ok(PermutedIndex {
        bits: b,
        seed,
        permutations,
        lists,
    })
}

pub fn write_index(index: &PermutedIndex, path: &Path) -> Result<()> {
    std::fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn read_index(path: &Path) -> Result<PermutedIndex> {
    Ok(decode_index(&std::fs::read(path)?)?)
}

pub fn encode_embeddings(embeddings: &[Embedding]) -> Result<Vec<u8>> {
    let dim = embeddings.first().map_or(0, Embedding::dim);
    let mut out = Vec::with_capacity(12 + embeddings.len() * dim * 8);
    out.extend_from_slice(&EMBEDDINGS_MAGIC);
    out.extend_from_slice(&(embeddings.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        if !e.is_finite() {
            return Err(Error::NonFinite("embedding".into()));
        }
        for v in e.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<Vec<Embedding>, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(EMBEDDINGS_MAGIC)?;
    let n = r.u32("embeddings count")? as usize;
    let dim = r.u32("embeddings dim")? as usize;
    if n > 0 && dim == 0 {
        return Err(invalid("embeddings header", "zero dimension"));
    }
    let needed = n as u128 * dim as u128 * 8;
    if needed > r.remaining() as u128 {
        return Err(FormatError::Truncated {
            context: "embeddings body".into(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            let x = r.f64("embedding value")?;
            if !x.is_finite() {
                return Err(FormatError::NonFinite {
                    context: "embedding value".into(),
                });
            }
            v.push(x);
        }
        out.push(Embedding::new(v));
    }
    r.finish()?;
    Ok(out)
}

pub fn write_embeddings(embeddings: &[Embedding], path: &Path) -> Result<()> {
    std::fs::write(path, encode_embeddings(embeddings)?)?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Vec<Embedding>> {
    Ok(decode_embeddings(&std::fs::read(path)?)?)
}

//! Random-hyperplane signatures and the permuted sorted index over them.

mod file;
mod hyperplanes;
mod index;
mod signature;


pub use file::{
    decode_embeddings, decode_index, encode_embeddings, encode_index, read_embeddings, read_index, write_embeddings,
    write_index, EMBEDDINGS_MAGIC, INDEX_MAGIC,
};
pub use hyperplanes::{sample_hyperplanes, signature, HyperplaneSet};
pub use index::{build_index, draw_permutations, IndexConfig, PermutedIndex, Scoring, SearchIndex, MAX_BITS, MIN_BITS};
pub use signature::{approx_cosine_distance, Signature};

/// Free-function form of [`PermutedIndex::beam_lookup`].
pub fn beam_lookup(index: &PermutedIndex, s: &Signature, beamwidth: usize) -> crate::Result<Vec<u32>> {
    index.beam_lookup(s, beamwidth)
}

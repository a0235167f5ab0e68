//! Embedding-based query-by-example speech search.
//!
//! Variable-length feature sequences are embedded into fixed-dimensional
//! vectors, either with a triplet-trained bidirectional LSTM ([`nawe`]) or
//! with DTW costs against a template set ([`dtw`]). The search collection is
//! indexed with permuted, lexicographically sorted LSH signatures
//! ([`lsh`]), and hits are scored with spoken-term retrieval metrics
//! ([`eval`]).

pub mod data;
pub mod dtw;
mod embedding;
pub mod error;
pub mod eval;
pub mod lsh;
pub(crate) mod io;
pub mod nawe;
pub mod qbe;
pub mod rng;

pub use embedding::Embedding;
pub use error::{Error, FormatError, Result};

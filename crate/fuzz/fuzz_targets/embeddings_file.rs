#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_core::lsh::{decode_embeddings, encode_embeddings};

fuzz_target!(|data: &[u8]| {
    if let Ok(embs) = decode_embeddings(data) {
        if !embs.is_empty() {
            assert_eq!(encode_embeddings(&embs).expect("re-encodes"), data);
        }
    }
});

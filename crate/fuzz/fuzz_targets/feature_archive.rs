#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_core::data::{decode_feature_archive, encode_feature_archive};

fuzz_target!(|data: &[u8]| {
    if let Ok(recs) = decode_feature_archive(data) {
        let again = encode_feature_archive(&recs).expect("decoded archive re-encodes");
        assert_eq!(decode_feature_archive(&again).expect("round trip"), recs);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_core::nawe::EncoderParams;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = EncoderParams::decode_model(data) {
        assert_eq!(params.encode_model(), data);
    }
});

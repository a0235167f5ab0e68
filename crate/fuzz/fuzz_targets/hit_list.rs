#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_core::qbe::parse_hit_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_hit_list(text);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_cli::files::parse_query_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_query_list(text);
    }
});

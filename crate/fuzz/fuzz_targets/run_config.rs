#![no_main]

use libfuzzer_sys::fuzz_target;
use qbe_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut cfg = RunConfig::default();
        let _ = cfg.apply_text(text);
        let _ = cfg.sweep_grid();
    }
});

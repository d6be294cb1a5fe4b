#![no_main]

use kgtriage_core::ingestion::parse_patterns;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_patterns(text);
    }
});

#![no_main]

use kgtriage_core::diagnosis::parse_scorer_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(resp) = parse_scorer_response(data) {
        for d in &resp.results {
            assert!((0.0..=1.0).contains(&d.confidence));
        }
    }
});

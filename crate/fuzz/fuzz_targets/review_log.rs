#![no_main]

use kgtriage_core::curation::{parse_review_log, ReviewQueue};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(events) = parse_review_log(text) {
        let _ = ReviewQueue::replay(events);
    }
});

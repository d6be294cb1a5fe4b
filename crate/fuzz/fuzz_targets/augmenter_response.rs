#![no_main]

use kgtriage_core::ingestion::parse_augmenter_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&len, body)) = data.split_first() else { return };
    let _ = parse_augmenter_response(body, len as usize * 8);
});

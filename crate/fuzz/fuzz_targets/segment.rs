#![no_main]

use kgtriage_core::ingestion::{segment_document, Document};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&b, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let budget = b as usize + 1;
    if let Ok(chunks) = segment_document(&Document::new("doc", text), budget) {
        assert_eq!(chunks.iter().map(|c| c.text.as_str()).collect::<String>(), text);
        assert!(chunks.iter().all(|c| c.text.chars().count() <= budget));
    }
});

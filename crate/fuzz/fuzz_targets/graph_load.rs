#![no_main]

use kgtriage_core::kg::KnowledgeGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = KnowledgeGraph::load(text) {
        g.check_invariants().expect("load only accepts sound graphs");
        let snap = g.snapshot();
        let back = KnowledgeGraph::load(&snap).expect("snapshot reloads");
        assert_eq!(back.snapshot(), snap);
    }
});

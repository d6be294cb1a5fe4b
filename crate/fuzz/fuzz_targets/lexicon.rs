#![no_main]

use kgtriage_core::ingestion::Lexicon;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = Lexicon::parse(text) {
        // whatever parses must survive its own rendering
        let again = Lexicon::parse(&lex.to_tsv()).expect("rendered lexicon parses");
        assert_eq!(again.to_tsv(), lex.to_tsv());
    }
});

#![no_main]

use kgtriage_gateway::config::ServiceConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ServiceConfig::parse(text);
    }
});

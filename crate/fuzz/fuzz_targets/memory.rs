#![no_main]
use escape_core::agents::memory::{parse_memory, reconcile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(parsed) = parse_memory(data) {
        let merged = reconcile(None, parsed.memory, &[]);
        let _ = parse_memory(&merged.serialize());
    }
});

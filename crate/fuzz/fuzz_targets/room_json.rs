#![no_main]
use escape_core::{validate_room, RoomSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // Anything that loads must survive validation, which replays and explores it.
    if let Ok(spec) = RoomSpec::from_json(data) {
        if spec.receptacles.len() <= 8 && spec.items.len() <= 8 {
            let _ = validate_room(&spec);
        }
    }
});

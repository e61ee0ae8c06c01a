#![no_main]
use escape_core::Action;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(action) = data.parse::<Action>() {
        // Canonical text parses back to the same action.
        let text = action.to_string();
        assert_eq!(text.parse::<Action>().as_ref(), Ok(&action), "{text:?}");
    }
});

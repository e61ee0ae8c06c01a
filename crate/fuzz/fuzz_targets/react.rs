#![no_main]
use escape_core::agents::parse::{analysis_body, parse_action_only, parse_react};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(out) = parse_react(data) {
        assert_eq!(parse_react(&out.render()).map(|o| o.action), Ok(out.action));
    }
    let _ = parse_action_only(data);
    let _ = analysis_body(data);
});

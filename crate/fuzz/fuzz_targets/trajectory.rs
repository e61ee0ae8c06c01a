#![no_main]
use escape_core::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(t) = Trajectory::from_jsonl(data) {
        assert_eq!(Trajectory::from_jsonl(&t.to_jsonl()).ok().as_ref(), Some(&t));
    }
});

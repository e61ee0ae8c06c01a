#![no_main]
use escape_core::SceneKey;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(key) = data.parse::<SceneKey>() {
        let text = key.to_string();
        assert_eq!(text.parse::<SceneKey>().as_ref(), Ok(&key), "{text:?}");
    }
});

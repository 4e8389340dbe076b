#![no_main]

use gbq::config::{parse_override, RunConfig};
use libfuzzer_sys::fuzz_target;

// Each input line is one KEY=VAL override applied on top of the defaults.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let lines: Vec<&str> = text.lines().collect();
    for l in &lines {
        if let Ok((key, _)) = parse_override(l) {
            assert!(!key.is_empty());
        }
    }
    let _ = RunConfig::from_json_with_overrides("", &lines);
});

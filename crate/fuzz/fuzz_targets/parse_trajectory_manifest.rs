#![no_main]

use gbq::io::parse_trajectory_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_trajectory_manifest(text) {
        assert!(m.t_end > 0.0 && m.intervals >= 2);
    }
});

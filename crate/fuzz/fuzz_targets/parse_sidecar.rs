#![no_main]

use gbq::io::{parse_sidecar, sidecar_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(side) = parse_sidecar(text) {
        let json = sidecar_to_json(&side).unwrap();
        let back = parse_sidecar(&json).unwrap();
        assert_eq!(back.nu, side.nu);
        assert_eq!(back.radius, side.radius);
    }
});

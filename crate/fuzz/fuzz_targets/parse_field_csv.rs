#![no_main]

use gbq::io::{field_to_csv, parse_field_csv, parse_sidecar};
use libfuzzer_sys::fuzz_target;

// Input layout: sidecar JSON on the first line, CSV body after it.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (side, body) = text.split_once('\n').unwrap_or((text, ""));
    let Ok(side) = parse_sidecar(side) else {
        return;
    };
    if let Ok(field) = parse_field_csv(body, &side) {
        let again = field_to_csv(&field).expect("accepted field serializes");
        let back = parse_field_csv(&again, &side).expect("serialized field parses");
        assert_eq!(back, field);
    }
});

#![no_main]

use gbq::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.frequency_system();
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again.to_json().unwrap(), cfg.to_json().unwrap());
        // Hashing resolves t_end, which fails for zero amplitude.
        if let Ok(h) = cfg.hash() {
            assert_eq!(again.hash().unwrap(), h);
        }
    }
});

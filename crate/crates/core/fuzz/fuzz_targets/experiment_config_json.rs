#![no_main]

use libfuzzer_sys::fuzz_target;
use vissample::bench::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_json(text) {
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).expect("re-parse"), cfg);
        }
    }
});

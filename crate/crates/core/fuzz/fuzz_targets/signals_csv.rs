#![no_main]

use libfuzzer_sys::fuzz_target;
use vissample::io::{parse_signals_csv, write_signals_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_signals_csv(text) {
        assert_eq!(parse_signals_csv(&write_signals_csv(&rows)).expect("re-parse"), rows);
    }
});

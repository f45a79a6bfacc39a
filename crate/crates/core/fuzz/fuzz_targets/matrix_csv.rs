#![no_main]

use libfuzzer_sys::fuzz_target;
use vissample::io::{parse_matrix_csv, write_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix_csv(text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = parse_matrix_csv(&write_matrix_csv(&m)).expect("re-parse");
        assert_eq!(again, m);
    }
});

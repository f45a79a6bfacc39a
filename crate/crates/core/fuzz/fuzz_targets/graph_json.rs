#![no_main]

use libfuzzer_sys::fuzz_target;
use vissample::io::{parse_graph_json, write_graph_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = parse_graph_json(text) {
        let _ = g.validate();
        assert_eq!(parse_graph_json(&write_graph_json(&g)).expect("re-parse"), g);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use overlook_sim::simulator::parse_trace_rows;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_trace_rows(text);
    }
});

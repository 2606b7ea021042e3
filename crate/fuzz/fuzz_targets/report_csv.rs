#![no_main]

use libfuzzer_sys::fuzz_target;
use overlook_sim::experiment::{parse_long_csv, render_long_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_long_csv(text) {
        let again = parse_long_csv(&render_long_csv(&rows)).unwrap();
        assert_eq!(again.len(), rows.len());
    }
});

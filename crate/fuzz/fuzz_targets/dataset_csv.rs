#![no_main]

use libfuzzer_sys::fuzz_target;
use overlook_sim::dataset::{parse_dataset, LoadOptions};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_dataset("fuzz", data, &LoadOptions::default()) {
        let k = ds.n_features();
        assert!(ds.records.iter().all(|r| r.features.len() == k));
        assert!(ds
            .records
            .iter()
            .flat_map(|r| &r.features)
            .all(|v| v.is_finite()));
        // Anything accepted must survive a write/read cycle.
        let again = parse_dataset("fuzz", ds.to_csv().as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(again.records.len(), ds.records.len());
    }
});

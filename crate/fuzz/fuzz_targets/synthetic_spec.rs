#![no_main]

use libfuzzer_sys::fuzz_target;
use overlook_sim::dataset::SyntheticSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = SyntheticSpec::parse(text) {
        assert!(spec.validate().is_ok());
        assert_eq!(SyntheticSpec::parse(&spec.to_arg()).unwrap(), spec);
    }
});

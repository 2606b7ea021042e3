#![no_main]

use libfuzzer_sys::fuzz_target;
use overlook_sim::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::parse(text) {
        if config.validate().is_ok() {
            let echoed = ExperimentConfig::parse(&config.to_config_text()).unwrap();
            assert_eq!(echoed, config);
        }
    }
});

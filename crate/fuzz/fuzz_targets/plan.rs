#![no_main]

use libfuzzer_sys::fuzz_target;
use tmimi::{DecoderConfig, PrecisionPlan};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plan) = text.parse::<PrecisionPlan>() {
        let canonical = plan.to_string();
        assert_eq!(canonical.parse::<PrecisionPlan>().unwrap(), plan);
        let config = DecoderConfig {
            num_layers: plan.num_layers(),
            ..DecoderConfig::default()
        };
        plan.storage_bytes(&config, true).unwrap();
    }
});

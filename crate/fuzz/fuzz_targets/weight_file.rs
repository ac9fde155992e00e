#![no_main]

use libfuzzer_sys::fuzz_target;
use tmimi::weight_file::{from_bytes, to_bytes};

fuzz_target!(|data: &[u8]| {
    // Anything accepted must re-serialize to the same bytes.
    if let Ok((weights, plan, _)) = from_bytes(data) {
        assert_eq!(to_bytes(&weights, &plan).unwrap(), data);
    }
});

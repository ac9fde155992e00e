#![no_main]

//! Appends a valid checksum to the input so mutations reach the structural
//! checks behind it.

use libfuzzer_sys::fuzz_target;
use tmimi::weight_file::{from_bytes, to_bytes};

fuzz_target!(|data: &[u8]| {
    let mut sealed = data.to_vec();
    sealed.extend_from_slice(&crc32fast::hash(data).to_le_bytes());
    if let Ok((weights, plan, _)) = from_bytes(&sealed) {
        assert_eq!(to_bytes(&weights, &plan).unwrap(), sealed);
    }
});

#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use tmimi::frames::{decode_frames, encode_frames};
use tmimi::stream::new_stream;
use tmimi::{DecoderConfig, DecoderWeights, PrecisionPlan, StreamState};

fn stream() -> StreamState {
    static WEIGHTS: OnceLock<DecoderWeights> = OnceLock::new();
    let w = WEIGHTS.get_or_init(|| DecoderWeights::init_random(&config(), 1).unwrap());
    new_stream(w, &PrecisionPlan::fp32(2)).unwrap()
}

fn config() -> DecoderConfig {
    DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8)
}

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = decode_frames(data, &config()) {
        // An empty file may carry either variant tag; otherwise the
        // encoding is canonical.
        let again = encode_frames(&frames).unwrap();
        if frames.is_empty() {
            assert!(decode_frames(&again, &config()).unwrap().is_empty());
        } else {
            assert_eq!(again, data);
        }
        // Accepted frames must decode; latents may be non-finite only if
        // the decoder reports it.
        let mut s = stream();
        for f in frames.iter().take(16) {
            if let Ok(chunk) = s.step(f) {
                assert_eq!(chunk.len(), 8);
            }
        }
    }
});

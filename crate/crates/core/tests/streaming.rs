mod common;

use std::sync::Arc;

use common::{max_abs_diff, random_config};
use tmimi::frames::{random_token_frames, FrameInput};
use tmimi::stream::new_stream;
use tmimi::{Decoder, DecoderConfig, DecoderWeights, PrecisionPlan, QuantScheme, Rng, StreamState};

fn decode(s: &mut StreamState, frames: &[FrameInput]) -> Vec<f32> {
    frames.iter().flat_map(|f| s.step(f).unwrap()).collect()
}

#[test]
fn streaming_matches_offline_on_random_cases() {
    let mut rng = Rng::new(3);
    for case in 0..30 {
        let window = [4, 8, 250][case % 3];
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let plan = PrecisionPlan::fp32(c.num_layers);
        let n = 1 + rng.below(64) as usize;
        let frames = random_token_frames(&c, n, rng.next_u64());
        let dec = Arc::new(Decoder::new(&w, &plan).unwrap());
        let offline = dec.forward_offline(&frames).unwrap();
        let mut s = StreamState::new(Arc::clone(&dec));
        let streamed = decode(&mut s, &frames);
        assert!(max_abs_diff(&streamed, &offline) <= 1e-4, "case {case}");
        let first = c.samples_per_frame;
        assert_eq!(streamed[..first], offline[..first], "case {case}");
    }
}

#[test]
fn streaming_matches_offline_under_quantized_plans() {
    let c = DecoderConfig::toy(3, 8, 2, 16, 4, 8, 16);
    let w = DecoderWeights::init_random(&c, 12).unwrap();
    let frames = random_token_frames(&c, 20, 4);
    for text in [
        "T1-3:int8,L:int8,A:int8",
        "T1-2:int4g4,T3:fp32,L:int4g4",
        "T1:int8,T2-3:fp32,L:fp32",
    ] {
        let plan: PrecisionPlan = text.parse().unwrap();
        let dec = Arc::new(Decoder::new(&w, &plan).unwrap());
        let mut s = StreamState::new(Arc::clone(&dec));
        let diff = max_abs_diff(
            &decode(&mut s, &frames),
            &dec.forward_offline(&frames).unwrap(),
        );
        assert!(diff <= 1e-4, "{text}: {diff}");
    }
}

#[test]
fn interleaved_streams_are_isolated() {
    let c = DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8);
    let w = DecoderWeights::init_random(&c, 1).unwrap();
    let plan = PrecisionPlan::fp32_tail(2, 1, QuantScheme::Int8PerChannel);
    let a = random_token_frames(&c, 10, 100);
    let b = random_token_frames(&c, 10, 200);
    let want_a = decode(&mut new_stream(&w, &plan).unwrap(), &a);
    let want_b = decode(&mut new_stream(&w, &plan).unwrap(), &b);

    let dec = Arc::new(Decoder::new(&w, &plan).unwrap());
    let mut sa = StreamState::new(Arc::clone(&dec));
    let mut sb = StreamState::new(dec);
    let (mut got_a, mut got_b) = (vec![], vec![]);
    for (fa, fb) in a.iter().zip(&b) {
        got_a.extend(sa.step(fa).unwrap());
        got_b.extend(sb.step(fb).unwrap());
    }
    assert_eq!(got_a, want_a);
    assert_eq!(got_b, want_b);
}

#[test]
fn streams_on_threads_share_one_decoder() {
    let c = DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8);
    let w = DecoderWeights::init_random(&c, 2).unwrap();
    let dec = Arc::new(Decoder::new(&w, &PrecisionPlan::fp32(2)).unwrap());
    let frames = random_token_frames(&c, 12, 5);
    let want = dec.forward_offline(&frames).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let dec = Arc::clone(&dec);
            let frames = frames.clone();
            std::thread::spawn(move || decode(&mut StreamState::new(dec), &frames))
        })
        .collect();
    for h in handles {
        assert!(max_abs_diff(&h.join().unwrap(), &want) <= 1e-4);
    }
}

#[test]
fn malformed_frame_is_rejected_without_advancing() {
    let c = DecoderConfig::toy(1, 4, 1, 8, 2, 4, 8);
    let w = DecoderWeights::init_random(&c, 3).unwrap();
    let mut s = new_stream(&w, &PrecisionPlan::fp32(1)).unwrap();
    assert!(s.step(&FrameInput::Tokens(vec![0; 3])).is_err());
    assert!(s.step(&FrameInput::Tokens(vec![16, 0, 0, 0])).is_err());
    assert!(s.step(&FrameInput::Latent(vec![0.0; 5])).is_err());
    assert_eq!(s.position(), 0);
    assert_eq!(s.valid_len(), 0);
}

mod common;

use std::path::PathBuf;

use common::random_config;
use tmimi::frames::{decode_frames, encode_frames, random_token_frames, FrameInput};
use tmimi::weight_file::{from_bytes, load, save, to_bytes};
use tmimi::{DecoderConfig, DecoderWeights, Error, FormatError, PrecisionPlan, QuantScheme, Rng};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden_weights() -> (DecoderWeights, PrecisionPlan) {
    let c = DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8);
    let w = DecoderWeights::init_random(&c, 2024).unwrap();
    (w, "T1:int4g4,T2:int8,L:fp32".parse().unwrap())
}

/// Set `TMIMI_BLESS=1` to regenerate the golden files after a deliberate
/// format change.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = fixture(name);
    if std::env::var_os("TMIMI_BLESS").is_some() {
        std::fs::write(&path, bytes).unwrap();
    }
    let stored = std::fs::read(&path).unwrap();
    assert!(stored == bytes, "{name} differs from the committed fixture");
}

#[test]
fn golden_weight_file_is_stable() {
    let (w, p) = golden_weights();
    check_golden("toy.tmim", &to_bytes(&w, &p).unwrap());
    let (w2, p2, _) = load(fixture("toy.tmim")).unwrap();
    assert_eq!(p2, p);
    assert_eq!(
        to_bytes(&w2, &p2).unwrap(),
        std::fs::read(fixture("toy.tmim")).unwrap()
    );
}

#[test]
fn golden_frames_file_is_stable() {
    let c = DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8);
    check_golden(
        "toy.tmfr",
        &encode_frames(&random_token_frames(&c, 4, 7)).unwrap(),
    );
    let frames = decode_frames(&std::fs::read(fixture("toy.tmfr")).unwrap(), &c).unwrap();
    assert_eq!(frames, random_token_frames(&c, 4, 7));
}

#[test]
fn weight_files_round_trip_across_random_configs() {
    let mut rng = Rng::new(31);
    let dir = tempfile::tempdir().unwrap();
    for case in 0..50 {
        let window = 1 + rng.below(8) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let schemes = [
            QuantScheme::Fp32,
            QuantScheme::Int8PerChannel,
            QuantScheme::Int4GroupWise {
                group_size: 1 + rng.below(8) as usize,
            },
        ];
        let mut plan = PrecisionPlan::fp32(c.num_layers);
        for s in plan.layer_schemes.iter_mut() {
            *s = schemes[rng.below(3) as usize];
        }
        plan.head_scheme = schemes[rng.below(3) as usize];
        plan.activation_quant = rng.below(2) == 1;
        let path = dir.path().join(format!("{case}.tmim"));
        save(&w, &plan, &path).unwrap();
        let (w2, p2, c2) = load(&path).unwrap();
        assert_eq!((&c2, &p2), (&c, &plan), "case {case}");
        assert_eq!(w2, w.quantized(&plan).unwrap(), "case {case}");
        assert_eq!(
            to_bytes(&w2, &p2).unwrap(),
            std::fs::read(&path).unwrap(),
            "case {case}"
        );
    }
}

#[test]
fn frames_files_round_trip_across_random_configs() {
    let mut rng = Rng::new(32);
    for case in 0..50 {
        let c = random_config(&mut rng, 4);
        let n = rng.below(20) as usize;
        let frames: Vec<FrameInput> = if case % 2 == 0 {
            random_token_frames(&c, n, rng.next_u64())
        } else {
            (0..n)
                .map(|_| FrameInput::random_latent(&c, &mut rng))
                .collect()
        };
        let bytes = encode_frames(&frames).unwrap();
        let back = decode_frames(&bytes, &c).unwrap();
        assert_eq!(back, frames, "case {case}");
        assert_eq!(encode_frames(&back).unwrap(), bytes);
    }
}

fn format_err(bytes: &[u8]) -> FormatError {
    match from_bytes(bytes) {
        Err(Error::Format(e)) => e,
        other => panic!("expected a format error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn corrupted_fixtures_map_to_designated_errors() {
    let good = std::fs::read(fixture("toy.tmim")).unwrap();
    let mut flipped = good.clone();
    let mid = good.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(format_err(&flipped), FormatError::Checksum { .. }));

    let mut version = good.clone();
    version[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert_eq!(format_err(&version), FormatError::UnsupportedVersion(2));

    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"RIFF");
    assert!(matches!(format_err(&magic), FormatError::BadMagic { .. }));

    assert!(matches!(
        format_err(&good[..20]),
        FormatError::Truncated { .. }
    ));
    assert!(matches!(
        format_err(&good[..good.len() - 1]),
        FormatError::Checksum { .. }
    ));
    assert!(matches!(format_err(&[]), FormatError::Truncated { .. }));

    let frames = std::fs::read(fixture("toy.tmfr")).unwrap();
    let c = DecoderConfig::toy(2, 8, 2, 16, 3, 6, 8);
    assert!(decode_frames(&frames[..frames.len() - 1], &c).is_err());
    let mut bad = frames.clone();
    bad[0] = b'X';
    assert!(decode_frames(&bad, &c).is_err());
}

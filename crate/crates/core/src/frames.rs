//! Decoder input frames and the `TMFR` frames container.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! "TMFR" | frame_count: u32 | variant: u32 | payload
//! variant 0: frame_count × num_codebooks × u16 token ids
//! variant 1: frame_count × model_dim × f32 latents
//! ```
//!
//! The header does not carry `num_codebooks` / `model_dim`; both come from the
//! decoder config, and the payload length must match exactly.

use crate::config::DecoderConfig;
use crate::error::{Error, FormatError, Result};
use crate::numerics::Rng;

pub const FRAMES_MAGIC: [u8; 4] = *b"TMFR";
const HEADER_LEN: usize = 12;

/// One codec frame: residual-VQ token ids (one per codebook) or a latent
/// vector that bypasses the embedding tables.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameInput {
    Tokens(Vec<u16>),
    Latent(Vec<f32>),
}

impl FrameInput {
    pub fn validate(&self, config: &DecoderConfig) -> Result<()> {
        match self {
            FrameInput::Tokens(t) => {
                if t.len() != config.num_codebooks {
                    return Err(Error::Frame(format!(
                        "{} tokens for {} codebooks",
                        t.len(),
                        config.num_codebooks
                    )));
                }
                if let Some((c, tok)) = t
                    .iter()
                    .enumerate()
                    .find(|(_, &tok)| tok as usize >= config.codebook_size)
                {
                    return Err(Error::Frame(format!(
                        "token {tok} in codebook {c} out of range 0..{}",
                        config.codebook_size
                    )));
                }
            }
            FrameInput::Latent(v) => {
                if v.len() != config.model_dim {
                    return Err(Error::Frame(format!(
                        "latent of length {} for model_dim {}",
                        v.len(),
                        config.model_dim
                    )));
                }
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(Error::NonFinite("latent frame"));
                }
            }
        }
        Ok(())
    }

    pub fn random_tokens(config: &DecoderConfig, rng: &mut Rng) -> Self {
        FrameInput::Tokens(
            (0..config.num_codebooks)
                .map(|_| rng.below(config.codebook_size as u64) as u16)
                .collect(),
        )
    }

    pub fn random_latent(config: &DecoderConfig, rng: &mut Rng) -> Self {
        FrameInput::Latent(
            (0..config.model_dim)
                .map(|_| rng.uniform_symmetric(1.0))
                .collect(),
        )
    }
}

/// `count` random token frames from `seed`.
pub fn random_token_frames(config: &DecoderConfig, count: usize, seed: u64) -> Vec<FrameInput> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| FrameInput::random_tokens(config, &mut rng))
        .collect()
}

/// Serializes frames; all frames must share one variant.
pub fn encode_frames(frames: &[FrameInput]) -> Result<Vec<u8>> {
    let variant = match frames.first() {
        Some(FrameInput::Tokens(_)) | None => 0u32,
        Some(FrameInput::Latent(_)) => 1u32,
    };
    let count = u32::try_from(frames.len())
        .map_err(|_| Error::Invalid(format!("{} frames exceed u32", frames.len())))?;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&FRAMES_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&variant.to_le_bytes());
    for f in frames {
        match (f, variant) {
            (FrameInput::Tokens(t), 0) => t
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            (FrameInput::Latent(l), 1) => l
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            _ => return Err(Error::Frame("mixed frame variants".into())),
        }
    }
    Ok(out)
}

/// Parses a `TMFR` buffer and validates every frame against `config`.
pub fn decode_frames(bytes: &[u8], config: &DecoderConfig) -> Result<Vec<FrameInput>> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            offset: 0,
            needed: HEADER_LEN,
            available: bytes.len(),
        }
        .into());
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != FRAMES_MAGIC {
        return Err(FormatError::BadMagic {
            expected: FRAMES_MAGIC,
            found: magic,
        }
        .into());
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let variant = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let (per_frame, elem) = match variant {
        0 => (config.num_codebooks, 2usize),
        1 => (config.model_dim, 4usize),
        v => return Err(FormatError::Malformed(format!("unknown frame variant {v}")).into()),
    };
    let payload = &bytes[HEADER_LEN..];
    let needed = count
        .checked_mul(per_frame * elem)
        .ok_or_else(|| FormatError::Malformed(format!("frame count {count} overflows")))?;
    if payload.len() < needed {
        return Err(FormatError::Truncated {
            offset: HEADER_LEN,
            needed,
            available: payload.len(),
        }
        .into());
    }
    if payload.len() > needed {
        return Err(FormatError::TrailingBytes(payload.len() - needed).into());
    }
    let frames: Vec<FrameInput> = payload
        .chunks_exact((per_frame * elem).max(1))
        .take(count)
        .map(|chunk| match variant {
            0 => FrameInput::Tokens(
                chunk
                    .chunks_exact(2)
                    .map(|b| u16::from_le_bytes([b[0], b[1]]))
                    .collect(),
            ),
            _ => FrameInput::Latent(
                chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
        })
        .collect();
    for f in &frames {
        f.validate(config)?;
    }
    Ok(frames)
}

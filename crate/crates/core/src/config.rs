//! Decoder hyperparameters and the named architecture presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Nonlinearity used in the feed-forward blocks and between the two head
/// linears.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `0.5 x (1 + tanh(√(2/π) (x + 0.044715 x³)))`
    #[default]
    GeluTanh,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::GeluTanh => 0,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::GeluTanh),
            _ => None,
        }
    }
}

/// Architecture of the transformer-only decoder.
///
/// The defaults give 40,810,720 non-embedding parameters:
/// 12 layers × (4·512² attention + 2·512·2048 FFN + 4·512 norm)
/// + 2·512 final norm + 512·1248 + 1248 + 1248·1920 head.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    pub num_layers: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub num_heads: usize,
    /// Frames visible to attention, current frame included.
    pub attention_window: usize,
    pub head_hidden_dim: usize,
    pub samples_per_frame: usize,
    pub sample_rate: u32,
    pub frame_rate: f32,
    pub num_codebooks: usize,
    pub codebook_size: usize,
    pub activation: Activation,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 12,
            model_dim: 512,
            ffn_dim: 2048,
            num_heads: 8,
            attention_window: 250,
            head_hidden_dim: 1248,
            samples_per_frame: 1920,
            sample_rate: 24_000,
            frame_rate: 12.5,
            num_codebooks: 8,
            codebook_size: 2048,
            activation: Activation::GeluTanh,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.model_dim == 0
            || self.num_heads == 0
            || !self.model_dim.is_multiple_of(self.num_heads)
        {
            return bad(format!(
                "model_dim {} must be a positive multiple of num_heads {}",
                self.model_dim, self.num_heads
            ));
        }
        if self.attention_window == 0 {
            return bad("attention_window must be at least 1".into());
        }
        if self.ffn_dim == 0 || self.head_hidden_dim == 0 || self.samples_per_frame == 0 {
            return bad("ffn_dim, head_hidden_dim and samples_per_frame must be positive".into());
        }
        if self.num_codebooks == 0 || self.codebook_size == 0 || self.codebook_size > 1 << 16 {
            return bad(format!(
                "{} codebooks of size {} (size must be in 1..=65536)",
                self.num_codebooks, self.codebook_size
            ));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite())
            || self.sample_rate as f64 / self.frame_rate as f64 != self.samples_per_frame as f64
        {
            return bad(format!(
                "samples_per_frame {} != sample_rate {} / frame_rate {}",
                self.samples_per_frame, self.sample_rate, self.frame_rate
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    /// Audio duration of one frame in milliseconds.
    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.frame_rate as f64
    }

    /// A small configuration for tests: `sample_rate` is chosen so that
    /// `samples_per_frame` stays consistent with the 12.5 Hz frame rate.
    pub fn toy(
        num_layers: usize,
        model_dim: usize,
        num_heads: usize,
        ffn_dim: usize,
        attention_window: usize,
        head_hidden_dim: usize,
        samples_per_frame: usize,
    ) -> Self {
        Self {
            num_layers,
            model_dim,
            ffn_dim,
            num_heads,
            attention_window,
            head_hidden_dim,
            samples_per_frame,
            sample_rate: (samples_per_frame as f64 * 12.5) as u32,
            frame_rate: 12.5,
            num_codebooks: 4,
            codebook_size: 16,
            activation: Activation::GeluTanh,
        }
    }
}

/// Named layer-count / linear-dimension variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Preset {
    #[default]
    TMimi12x2048,
    TMimi8,
    TMimi12x3072,
    TMimi16x2048,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::TMimi12x2048,
        Preset::TMimi8,
        Preset::TMimi12x3072,
        Preset::TMimi16x2048,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TMimi12x2048 => "t-mimi-12x2048",
            Preset::TMimi8 => "t-mimi-8",
            Preset::TMimi12x3072 => "t-mimi-12x3072",
            Preset::TMimi16x2048 => "t-mimi-16x2048",
        }
    }

    /// The "linear dim" axis widens the two head linears; the 3072 variant
    /// scales the head hidden width by 3072/2048 (1248 → 1872).
    pub fn config(self) -> DecoderConfig {
        let base = DecoderConfig::default();
        match self {
            Preset::TMimi12x2048 => base,
            Preset::TMimi8 => DecoderConfig {
                num_layers: 8,
                ..base
            },
            Preset::TMimi12x3072 => DecoderConfig {
                head_hidden_dim: base.head_hidden_dim * 3072 / 2048,
                ..base
            },
            Preset::TMimi16x2048 => DecoderConfig {
                num_layers: 16,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

//! Streaming inference for a transformer-only neural audio codec decoder.
//!
//! The decoder turns codec frames (residual-VQ tokens or pre-embedded
//! latents, 12.5 frames per second) into 24 kHz waveform, one 80 ms chunk of
//! 1920 samples per frame. A stack of pre-norm transformer layers with
//! fixed-window causal attention feeds a two-linear upsampling head whose
//! per-frame outputs are concatenated without overlap-add.
//!
//! Weights can be held at mixed precision (`fp32`, per-channel `int8`,
//! group-wise `int4`) following a [`PrecisionPlan`]; quantized layers run as
//! fake-quant in the f32 pipeline.

pub mod config;
pub mod error;
pub mod frames;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod plan;
pub mod quant;
pub mod stream;
pub mod weight_file;

pub use config::{Activation, DecoderConfig, Preset};
pub use error::{Error, FormatError, Result};
pub use frames::FrameInput;
pub use model::{Decoder, DecoderWeights};
pub use numerics::{Rng, Tensor2D};
pub use plan::PrecisionPlan;
pub use quant::{QuantScheme, QuantizedTensor};
pub use stream::StreamState;

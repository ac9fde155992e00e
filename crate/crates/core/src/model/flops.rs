//! Analytic multiply-accumulate counts per decoded frame.
//!
//! Only multiply-adds are counted: linear layers, attention scores and the
//! attention-weighted value sums. Norms, activations, softmax and the
//! embedding sum are excluded. The numerics kernels bump
//! [`crate::numerics::macs`] with the same convention, so a streaming step
//! can be checked against these formulas exactly.

use crate::config::DecoderConfig;

/// MACs for one transformer layer when `context` frames are visible:
/// `4·d² + 2·d·ffn + 2·context·d`.
pub fn layer_flops(config: &DecoderConfig, context: usize) -> u64 {
    let d = config.model_dim as u64;
    let f = config.ffn_dim as u64;
    4 * d * d + 2 * d * f + 2 * context as u64 * d
}

/// MACs of the two-linear head: `d·hidden + hidden·samples_per_frame`.
pub fn head_flops_per_frame(config: &DecoderConfig) -> u64 {
    let h = config.head_hidden_dim as u64;
    config.model_dim as u64 * h + h * config.samples_per_frame as u64
}

/// MACs of one streaming step with `context` cached frames (current one
/// included; clamped to the attention window).
pub fn flops_per_frame_at(config: &DecoderConfig, context: usize) -> u64 {
    let ctx = context.min(config.attention_window);
    config.num_layers as u64 * layer_flops(config, ctx) + head_flops_per_frame(config)
}

/// Steady-state MACs per frame, with the attention window full.
pub fn flops_per_frame(config: &DecoderConfig) -> u64 {
    flops_per_frame_at(config, config.attention_window)
}

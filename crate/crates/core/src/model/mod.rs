//! The decoder graph: parameter layout, weights, the prepared forward pass,
//! cost accounting and the transposed-convolution baseline head.

pub mod decoder;
pub mod deconv;
pub mod flops;
pub mod layout;
pub mod weights;

pub use decoder::{attention_span, embed_frame, forward_offline, Decoder};
pub use deconv::{
    deconv_flops_at, deconv_flops_per_frame, deconv_forward, DeconvConfig, DeconvStream,
    DeconvWeights,
};
pub use flops::{flops_per_frame, flops_per_frame_at, head_flops_per_frame, layer_flops};
pub use layout::{embedding_param_count, param_count, tensor_specs, Owner, Role, TensorSpec};
pub use weights::{DecoderWeights, HeadWeights, LayerWeights, LinearWeight, NormWeights};

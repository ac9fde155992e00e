//! Canonical tensor inventory of a decoder configuration.
//!
//! Every stored tensor is two-dimensional; vectors are `1 × n`. Linear
//! weights are `out_features × in_features`, so a row is an output channel.

use crate::config::DecoderConfig;

/// Which part of the network a tensor belongs to. Precision plans assign
/// one scheme per owner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Owner {
    Embedding,
    /// Zero-based transformer layer index.
    Layer(usize),
    /// Final norm plus the two upsampling linears.
    Head,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Quantizable matrix.
    Linear,
    /// Norm scale/shift or bias; always kept in f32.
    Vector,
    /// Codebook embedding table; always kept in f32.
    Embedding,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub owner: Owner,
    pub role: Role,
    /// Fan-in used by the scaled-uniform initializer.
    pub fan_in: usize,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }
}

pub(crate) fn layer_name(layer: usize, suffix: &str) -> String {
    format!("layers.{layer}.{suffix}")
}

/// All tensors of `config`, in file order.
pub fn tensor_specs(config: &DecoderConfig) -> Vec<TensorSpec> {
    let d = config.model_dim;
    let mut specs = Vec::new();
    let mut push = |name: String, rows, cols, owner, role, fan_in| {
        specs.push(TensorSpec {
            name,
            rows,
            cols,
            owner,
            role,
            fan_in,
        })
    };
    for c in 0..config.num_codebooks {
        push(
            format!("embed.{c}"),
            config.codebook_size,
            d,
            Owner::Embedding,
            Role::Embedding,
            config.num_codebooks,
        );
    }
    for l in 0..config.num_layers {
        let o = Owner::Layer(l);
        push(layer_name(l, "attn_norm.weight"), 1, d, o, Role::Vector, 1);
        push(layer_name(l, "attn_norm.bias"), 1, d, o, Role::Vector, 1);
        for p in ["q_proj", "k_proj", "v_proj", "o_proj"] {
            push(
                layer_name(l, &format!("attn.{p}")),
                d,
                d,
                o,
                Role::Linear,
                d,
            );
        }
        push(layer_name(l, "ffn_norm.weight"), 1, d, o, Role::Vector, 1);
        push(layer_name(l, "ffn_norm.bias"), 1, d, o, Role::Vector, 1);
        push(
            layer_name(l, "ffn.up"),
            config.ffn_dim,
            d,
            o,
            Role::Linear,
            d,
        );
        push(
            layer_name(l, "ffn.down"),
            d,
            config.ffn_dim,
            o,
            Role::Linear,
            config.ffn_dim,
        );
    }
    let h = Owner::Head;
    push("final_norm.weight".into(), 1, d, h, Role::Vector, 1);
    push("final_norm.bias".into(), 1, d, h, Role::Vector, 1);
    push(
        "head.linear1.weight".into(),
        config.head_hidden_dim,
        d,
        h,
        Role::Linear,
        d,
    );
    push(
        "head.linear1.bias".into(),
        1,
        config.head_hidden_dim,
        h,
        Role::Vector,
        d,
    );
    push(
        "head.linear2.weight".into(),
        config.samples_per_frame,
        config.head_hidden_dim,
        h,
        Role::Linear,
        config.head_hidden_dim,
    );
    specs
}

/// Decoder parameters excluding the codebook embedding tables.
pub fn param_count(config: &DecoderConfig) -> u64 {
    tensor_specs(config)
        .iter()
        .filter(|s| s.owner != Owner::Embedding)
        .map(|s| s.numel() as u64)
        .sum()
}

pub fn embedding_param_count(config: &DecoderConfig) -> u64 {
    (config.num_codebooks * config.codebook_size * config.model_dim) as u64
}

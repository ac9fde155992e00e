//! Serializable reports and the JSON form of a decoder configuration.
//! Schemas live in `docs/schemas/`.

use serde::{Deserialize, Serialize};
use tmimi::{Activation, DecoderConfig};

/// JSON mirror of [`DecoderConfig`]; missing fields take the default
/// preset's values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigJson {
    pub num_layers: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub num_heads: usize,
    pub attention_window: usize,
    pub head_hidden_dim: usize,
    pub samples_per_frame: usize,
    pub sample_rate: u32,
    pub frame_rate: f32,
    pub num_codebooks: usize,
    pub codebook_size: usize,
    pub activation: String,
}

impl Default for ConfigJson {
    fn default() -> Self {
        (&DecoderConfig::default()).into()
    }
}

impl From<&DecoderConfig> for ConfigJson {
    fn from(c: &DecoderConfig) -> Self {
        Self {
            num_layers: c.num_layers,
            model_dim: c.model_dim,
            ffn_dim: c.ffn_dim,
            num_heads: c.num_heads,
            attention_window: c.attention_window,
            head_hidden_dim: c.head_hidden_dim,
            samples_per_frame: c.samples_per_frame,
            sample_rate: c.sample_rate,
            frame_rate: c.frame_rate,
            num_codebooks: c.num_codebooks,
            codebook_size: c.codebook_size,
            activation: match c.activation {
                Activation::GeluTanh => "gelu-tanh".into(),
            },
        }
    }
}

impl TryFrom<ConfigJson> for DecoderConfig {
    type Error = tmimi::Error;

    fn try_from(j: ConfigJson) -> tmimi::Result<Self> {
        let activation = match j.activation.as_str() {
            "gelu-tanh" => Activation::GeluTanh,
            other => {
                return Err(tmimi::Error::Config(format!(
                    "unknown activation `{other}`"
                )))
            }
        };
        let c = DecoderConfig {
            num_layers: j.num_layers,
            model_dim: j.model_dim,
            ffn_dim: j.ffn_dim,
            num_heads: j.num_heads,
            attention_window: j.attention_window,
            head_hidden_dim: j.head_hidden_dim,
            samples_per_frame: j.samples_per_frame,
            sample_rate: j.sample_rate,
            frame_rate: j.frame_rate,
            num_codebooks: j.num_codebooks,
            codebook_size: j.codebook_size,
            activation,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub config: ConfigJson,
    pub plan: String,
    /// Parameters excluding the embedding tables.
    pub param_count: u64,
    pub embedding_param_count: u64,
    /// Weight storage at the file's plan, embeddings and scales excluded.
    pub storage_bytes: u64,
    pub storage_mb: f64,
    /// Same, with 4 bytes per quantization scale added.
    pub storage_bytes_with_scales: u64,
    /// Storage of the same model kept entirely at fp32.
    pub fp32_storage_mb: f64,
    pub flops_per_frame: u64,
    pub samples_per_frame: usize,
    pub frame_ms: f64,
    pub kv_cache_bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Transformer,
    Deconv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ConfigJson,
    pub plan: String,
    pub head: HeadKind,
    pub chunks: usize,
    pub warmup: usize,
    pub chunk_ms: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    /// Mean latency per chunk divided by the chunk duration.
    pub rtf: f64,
    /// Analytic multiply-accumulates per frame with a full window.
    pub flops_per_frame: u64,
    /// Multiply-accumulates of the upsampling head alone.
    pub head_flops_per_frame: u64,
    pub head_param_count: u64,
    /// Weight storage (transformer at the plan's widths, deconv head at fp32).
    pub storage_bytes: u64,
    pub pinned_core: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub plan: String,
    pub storage_mb: f64,
    pub storage_mb_with_scales: f64,
    /// dB against the fp32-plan output; 100 means identical.
    pub si_sdr_db: f64,
    pub mel_l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ConfigJson,
    pub frames: usize,
    pub rows: Vec<SweepRow>,
}

/// Nearest-rank percentile of ascending `sorted` data, `p` in (0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

//! Incremental decoding: one frame in, one chunk of `samples_per_frame`
//! samples out.
//!
//! Each layer keeps its post-projection keys and values for the last
//! `attention_window` frames (current frame included) in a ring buffer, so
//! per-step cost stops growing once the window is full. The arithmetic
//! mirrors [`Decoder::forward_offline`] step for step.

use std::sync::Arc;

use crate::error::Result;
use crate::frames::FrameInput;
use crate::model::decoder::attention_scale;
use crate::model::{Decoder, DecoderWeights};
use crate::numerics::{self, gelu_in_place, macs, DEFAULT_LAYER_NORM_EPS};
use crate::plan::PrecisionPlan;
use crate::quant::dynamic_quant_row;

/// Fixed-capacity key/value history of one layer, oldest first.
#[derive(Clone, Debug)]
struct KvRing {
    dim: usize,
    capacity: usize,
    start: usize,
    len: usize,
    keys: Vec<f32>,
    values: Vec<f32>,
}

impl KvRing {
    fn new(capacity: usize, dim: usize) -> Self {
        Self {
            dim,
            capacity,
            start: 0,
            len: 0,
            keys: vec![0.0; capacity * dim],
            values: vec![0.0; capacity * dim],
        }
    }

    fn push(&mut self, k: &[f32], v: &[f32]) {
        let slot = if self.len < self.capacity {
            self.len += 1;
            (self.start + self.len - 1) % self.capacity
        } else {
            let s = self.start;
            self.start = (self.start + 1) % self.capacity;
            s
        };
        self.keys[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(k);
        self.values[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(v);
    }

    /// Slot of the `i`-th oldest entry.
    fn slot(&self, i: usize) -> usize {
        (self.start + i) % self.capacity
    }

    fn key(&self, i: usize) -> &[f32] {
        let s = self.slot(i);
        &self.keys[s * self.dim..(s + 1) * self.dim]
    }

    fn value(&self, i: usize) -> &[f32] {
        let s = self.slot(i);
        &self.values[s * self.dim..(s + 1) * self.dim]
    }

    fn clear(&mut self) {
        self.start = 0;
        self.len = 0;
    }
}

/// Per-stream decoding state. Owns a handle to the shared prepared decoder;
/// the state itself is single-writer.
#[derive(Clone, Debug)]
pub struct StreamState {
    decoder: Arc<Decoder>,
    caches: Vec<KvRing>,
    position: u64,
    scratch: Scratch,
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    h: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    ctx: Vec<f32>,
    o: Vec<f32>,
    up: Vec<f32>,
    scores: Vec<f32>,
}

/// Prepares `weights` under `plan` (fake-quantizing once) and opens a stream.
pub fn new_stream(weights: &DecoderWeights, plan: &PrecisionPlan) -> Result<StreamState> {
    Ok(StreamState::new(Arc::new(Decoder::new(weights, plan)?)))
}

impl StreamState {
    pub fn new(decoder: Arc<Decoder>) -> Self {
        let c = &decoder.config;
        let caches = (0..c.num_layers)
            .map(|_| KvRing::new(c.attention_window, c.model_dim))
            .collect();
        let d = c.model_dim;
        let scratch = Scratch {
            h: vec![0.0; d],
            q: vec![0.0; d],
            k: vec![0.0; d],
            v: vec![0.0; d],
            ctx: vec![0.0; d],
            o: vec![0.0; d],
            up: vec![0.0; c.ffn_dim],
            scores: Vec::with_capacity(c.attention_window),
        };
        Self {
            decoder,
            caches,
            position: 0,
            scratch,
        }
    }

    pub fn decoder(&self) -> &Arc<Decoder> {
        &self.decoder
    }

    /// Frames currently held in each layer's cache.
    pub fn valid_len(&self) -> usize {
        self.caches.first().map_or(0, |c| c.len)
    }

    /// Frames decoded since creation or the last reset.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Bytes held by the key/value caches:
    /// `num_layers × 2 × window × model_dim × 4`.
    pub fn cache_bytes(&self) -> usize {
        self.caches
            .iter()
            .map(|c| (c.keys.len() + c.values.len()) * std::mem::size_of::<f32>())
            .sum()
    }

    pub fn reset(&mut self) {
        for c in &mut self.caches {
            c.clear();
        }
        self.position = 0;
    }

    /// Decodes one frame into `samples_per_frame` samples.
    pub fn step(&mut self, frame: &FrameInput) -> Result<Vec<f32>> {
        let hidden = self.step_hidden(frame)?;
        Ok(self.decoder.head_row(&hidden))
    }

    /// Advances the transformer stack by one frame and returns the
    /// final-normed hidden state (the head input).
    pub fn step_hidden(&mut self, frame: &FrameInput) -> Result<Vec<f32>> {
        let dec = Arc::clone(&self.decoder);
        let cfg = &dec.config;
        let mut x = dec.embed(frame)?;
        let hd = cfg.head_dim();
        let scale = attention_scale(hd);
        let s = &mut self.scratch;
        for (layer, cache) in dec.layers.iter().zip(&mut self.caches) {
            let n = &layer.attn_norm;
            numerics::layer_norm_row(&x, &n.gamma, &n.beta, DEFAULT_LAYER_NORM_EPS, &mut s.h);
            project_row(&s.h, &layer.q_proj, layer.act_quant, &mut s.q);
            project_row(&s.h, &layer.k_proj, layer.act_quant, &mut s.k);
            project_row(&s.h, &layer.v_proj, layer.act_quant, &mut s.v);
            cache.push(&s.k, &s.v);

            s.ctx.fill(0.0);
            for h in 0..cfg.num_heads {
                let cols = h * hd..(h + 1) * hd;
                s.scores.clear();
                for i in 0..cache.len {
                    let sc = numerics::dot(&s.q[cols.clone()], &cache.key(i)[cols.clone()]);
                    s.scores.push(sc * scale);
                }
                numerics::softmax_in_place(&mut s.scores);
                macs::add(cache.len * hd);
                let out = &mut s.ctx[cols.clone()];
                for (i, &p) in s.scores.iter().enumerate() {
                    for (o, vv) in out.iter_mut().zip(&cache.value(i)[cols.clone()]) {
                        *o += p * vv;
                    }
                }
            }
            project_row(&s.ctx, &layer.o_proj, layer.act_quant, &mut s.o);
            for (a, b) in x.iter_mut().zip(&s.o) {
                *a += b;
            }

            let n = &layer.ffn_norm;
            numerics::layer_norm_row(&x, &n.gamma, &n.beta, DEFAULT_LAYER_NORM_EPS, &mut s.h);
            project_row(&s.h, &layer.ffn_up, layer.act_quant, &mut s.up);
            gelu_in_place(&mut s.up);
            project_row(&s.up, &layer.ffn_down, layer.act_quant, &mut s.o);
            for (a, b) in x.iter_mut().zip(&s.o) {
                *a += b;
            }
        }
        let n = &dec.head.final_norm;
        numerics::layer_norm_row(&x, &n.gamma, &n.beta, DEFAULT_LAYER_NORM_EPS, &mut s.h);
        self.position += 1;
        Ok(s.h.clone())
    }
}

fn project_row(x: &[f32], w: &numerics::Tensor2D, act_quant: bool, out: &mut [f32]) {
    numerics::linear_row(x, w, None, out);
    if act_quant {
        dynamic_quant_row(out);
    }
}

//! Prepared decoder and the offline (whole-sequence) forward pass.
//!
//! Layer structure (pre-norm, no positional encoding; order inside the
//! window comes from the causal mask alone):
//!
//! ```text
//! x   = Σ_c embed_c[token_c]            (or the latent frame)
//! x  += o_proj(attn(ln1(x)))            per layer
//! x  += down(gelu(up(ln2(x))))
//! y   = linear2(gelu(linear1(ln_f(x)) + bias1))    → samples_per_frame
//! ```
//!
//! Frame `t` attends to frames [`attention_span`]`(t, window)`. Per-frame
//! head outputs are concatenated as-is.

use std::ops::Range;

use crate::config::DecoderConfig;
use crate::error::{Error, Result};
use crate::frames::FrameInput;
use crate::model::weights::{DecoderWeights, LinearWeight, NormWeights};
use crate::numerics::{self, gelu_in_place, macs, Mask, Tensor2D, DEFAULT_LAYER_NORM_EPS};
use crate::plan::PrecisionPlan;
use crate::quant::{dynamic_quant_row, QuantScheme};

/// Frames visible to frame `t` under a window of `window` frames, the
/// current frame included. Shared by the offline mask and the streaming
/// ring buffers.
pub fn attention_span(t: usize, window: usize) -> Range<usize> {
    (t + 1).saturating_sub(window)..t + 1
}

#[derive(Clone, Debug)]
pub(crate) struct PreparedLayer {
    pub attn_norm: NormWeights,
    pub q_proj: Tensor2D,
    pub k_proj: Tensor2D,
    pub v_proj: Tensor2D,
    pub o_proj: Tensor2D,
    pub ffn_norm: NormWeights,
    pub ffn_up: Tensor2D,
    pub ffn_down: Tensor2D,
    /// Fake-quantize matmul outputs to int8 per row.
    pub act_quant: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct PreparedHead {
    pub final_norm: NormWeights,
    pub linear1: Tensor2D,
    pub bias1: Vec<f32>,
    pub linear2: Tensor2D,
    pub act_quant: bool,
}

/// Weights resolved to the f32 matrices the forward pass multiplies by.
/// Fake-quantization per the plan happens once, here.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub(crate) config: DecoderConfig,
    pub(crate) plan: PrecisionPlan,
    pub(crate) embeddings: Vec<Tensor2D>,
    pub(crate) layers: Vec<PreparedLayer>,
    pub(crate) head: PreparedHead,
}

impl Decoder {
    pub fn new(weights: &DecoderWeights, plan: &PrecisionPlan) -> Result<Self> {
        let config = &weights.config;
        config.validate()?;
        plan.check(config)?;
        let aq = |s: QuantScheme| plan.activation_quant && s.is_quantized();
        let layers = weights
            .layers
            .iter()
            .zip(&plan.layer_schemes)
            .map(|(l, &s)| {
                let eff = |w: &LinearWeight| w.effective(s);
                Ok(PreparedLayer {
                    attn_norm: l.attn_norm.clone(),
                    q_proj: eff(&l.q_proj)?,
                    k_proj: eff(&l.k_proj)?,
                    v_proj: eff(&l.v_proj)?,
                    o_proj: eff(&l.o_proj)?,
                    ffn_norm: l.ffn_norm.clone(),
                    ffn_up: eff(&l.ffn_up)?,
                    ffn_down: eff(&l.ffn_down)?,
                    act_quant: aq(s),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hs = plan.head_scheme;
        let head = PreparedHead {
            final_norm: weights.final_norm.clone(),
            linear1: weights.head.linear1.effective(hs)?,
            bias1: weights.head.bias1.clone(),
            linear2: weights.head.linear2.effective(hs)?,
            act_quant: aq(hs),
        };
        Ok(Self {
            config: config.clone(),
            plan: plan.clone(),
            embeddings: weights.embeddings.clone(),
            layers,
            head,
        })
    }

    /// Uses the stored weights as they are (quantized ones dequantized),
    /// with no activation quantization.
    pub fn unquantized(weights: &DecoderWeights) -> Result<Self> {
        Self::new(weights, &PrecisionPlan::fp32(weights.config.num_layers))
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn plan(&self) -> &PrecisionPlan {
        &self.plan
    }

    /// Sum of per-codebook embeddings, or the latent itself.
    pub fn embed(&self, frame: &FrameInput) -> Result<Vec<f32>> {
        sum_embeddings(&self.embeddings, &self.config, frame)
    }

    /// Decodes a whole sequence at once with a windowed causal mask.
    pub fn forward_offline(&self, frames: &[FrameInput]) -> Result<Vec<f32>> {
        let hidden = self.hidden_offline(frames)?;
        let mut out = Vec::with_capacity(frames.len() * self.config.samples_per_frame);
        for t in 0..hidden.rows() {
            out.extend(self.head_row(hidden.row(t)));
        }
        Ok(out)
    }

    /// Final-normed hidden states, one row per frame.
    pub fn hidden_offline(&self, frames: &[FrameInput]) -> Result<Tensor2D> {
        if frames.is_empty() {
            return Err(Error::Empty("frame sequence"));
        }
        let d = self.config.model_dim;
        let mut x = Tensor2D::zeros(frames.len(), d);
        for (t, f) in frames.iter().enumerate() {
            x.row_mut(t).copy_from_slice(&self.embed(f)?);
        }
        let n = frames.len();
        let w = self.config.attention_window;
        let mask = Mask::new(n, n, |t, j| attention_span(t, w).contains(&j));
        for layer in &self.layers {
            let h = norm(&x, &layer.attn_norm)?;
            let q = project(&h, &layer.q_proj, None, layer.act_quant)?;
            let k = project(&h, &layer.k_proj, None, layer.act_quant)?;
            let v = project(&h, &layer.v_proj, None, layer.act_quant)?;
            let ctx = self.masked_attention(&q, &k, &v, &mask)?;
            let o = project(&ctx, &layer.o_proj, None, layer.act_quant)?;
            x.add_assign(&o)?;
            let h = norm(&x, &layer.ffn_norm)?;
            let mut u = project(&h, &layer.ffn_up, None, layer.act_quant)?;
            gelu_in_place(u.data_mut());
            let dn = project(&u, &layer.ffn_down, None, layer.act_quant)?;
            x.add_assign(&dn)?;
        }
        norm(&x, &self.head.final_norm)
    }

    fn masked_attention(
        &self,
        q: &Tensor2D,
        k: &Tensor2D,
        v: &Tensor2D,
        mask: &Mask,
    ) -> Result<Tensor2D> {
        let n = q.rows();
        let hd = self.config.head_dim();
        let scale = attention_scale(hd);
        let mut ctx = Tensor2D::zeros(n, self.config.model_dim);
        let mut scores = Tensor2D::zeros(n, n);
        for h in 0..self.config.num_heads {
            let cols = h * hd..(h + 1) * hd;
            scores.data_mut().fill(0.0);
            for t in 0..n {
                for j in attention_span(t, self.config.attention_window) {
                    let s = numerics::dot(&q.row(t)[cols.clone()], &k.row(j)[cols.clone()]);
                    scores.set(t, j, s * scale);
                }
            }
            let probs = numerics::softmax_rows(&scores, Some(mask))?;
            for t in 0..n {
                let span = attention_span(t, self.config.attention_window);
                macs::add(span.len() * hd);
                let out = &mut ctx.row_mut(t)[cols.clone()];
                for j in span {
                    let p = probs.get(t, j);
                    for (o, vv) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                        *o += p * vv;
                    }
                }
            }
        }
        Ok(ctx)
    }

    /// Head applied to one final-normed hidden row.
    pub(crate) fn head_row(&self, hidden: &[f32]) -> Vec<f32> {
        let head = &self.head;
        let mut a = vec![0.0f32; head.linear1.rows()];
        numerics::linear_row(hidden, &head.linear1, Some(&head.bias1), &mut a);
        if head.act_quant {
            dynamic_quant_row(&mut a);
        }
        gelu_in_place(&mut a);
        let mut y = vec![0.0f32; head.linear2.rows()];
        numerics::linear_row(&a, &head.linear2, None, &mut y);
        if head.act_quant {
            dynamic_quant_row(&mut y);
        }
        y
    }
}

pub(crate) fn attention_scale(head_dim: usize) -> f32 {
    1.0 / (head_dim as f32).sqrt()
}

fn norm(x: &Tensor2D, n: &NormWeights) -> Result<Tensor2D> {
    numerics::layer_norm(x, &n.gamma, &n.beta, DEFAULT_LAYER_NORM_EPS)
}

fn project(x: &Tensor2D, w: &Tensor2D, bias: Option<&[f32]>, act_quant: bool) -> Result<Tensor2D> {
    let mut y = numerics::linear(x, w, bias)?;
    if act_quant {
        for r in 0..y.rows() {
            dynamic_quant_row(y.row_mut(r));
        }
    }
    Ok(y)
}

/// Embeds one frame with the given weights.
pub fn embed_frame(input: &FrameInput, weights: &DecoderWeights) -> Result<Vec<f32>> {
    sum_embeddings(&weights.embeddings, &weights.config, input)
}

fn sum_embeddings(
    tables: &[Tensor2D],
    config: &DecoderConfig,
    frame: &FrameInput,
) -> Result<Vec<f32>> {
    frame.validate(config)?;
    Ok(match frame {
        FrameInput::Tokens(tokens) => {
            let mut acc = vec![0.0f32; config.model_dim];
            for (table, &tok) in tables.iter().zip(tokens) {
                for (a, e) in acc.iter_mut().zip(table.row(tok as usize)) {
                    *a += e;
                }
            }
            acc
        }
        FrameInput::Latent(v) => v.clone(),
    })
}

/// One-shot offline decode: prepares the weights under `plan` and runs
/// [`Decoder::forward_offline`].
pub fn forward_offline(
    frames: &[FrameInput],
    weights: &DecoderWeights,
    plan: &PrecisionPlan,
) -> Result<Vec<f32>> {
    Decoder::new(weights, plan)?.forward_offline(frames)
}

//! Shared helpers: random small configurations and a straight-line forward
//! pass written from the architecture description alone.

#![allow(dead_code)]

use tmimi::frames::FrameInput;
use tmimi::model::LinearWeight;
use tmimi::{DecoderConfig, DecoderWeights, Rng};

pub fn random_config(rng: &mut Rng, window: usize) -> DecoderConfig {
    let heads = 1 + rng.below(2) as usize;
    let head_dim = 2 * (1 + rng.below(2) as usize);
    let layers = 1 + rng.below(3) as usize;
    let ffn = 8 + 4 * rng.below(3) as usize;
    let hidden = 4 + rng.below(5) as usize;
    let spf = 2 * (2 + rng.below(6) as usize);
    DecoderConfig::toy(layers, heads * head_dim, heads, ffn, window, hidden, spf)
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

fn ln(x: &[f32], g: &[f32], b: &[f32]) -> Vec<f32> {
    let n = x.len() as f32;
    let mean = x.iter().sum::<f32>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter()
        .zip(g.iter().zip(b))
        .map(|(v, (g, b))| (v - mean) * inv * g + b)
        .collect()
}

/// `w · x` with `w` stored out × in.
fn mv(w: &LinearWeight, x: &[f32]) -> Vec<f32> {
    let w = w.to_dense();
    (0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn gelu(x: f32) -> f32 {
    let c = (2.0f32 / std::f32::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

/// Unquantized forward pass, frame by frame, recomputing everything.
pub fn naive_forward(frames: &[FrameInput], w: &DecoderWeights) -> Vec<f32> {
    let c = &w.config;
    let d = c.model_dim;
    let hd = d / c.num_heads;
    let mut x: Vec<Vec<f32>> = frames
        .iter()
        .map(|f| match f {
            FrameInput::Latent(v) => v.clone(),
            FrameInput::Tokens(ids) => {
                let mut e = vec![0.0; d];
                for (cb, &id) in ids.iter().enumerate() {
                    for (a, b) in e.iter_mut().zip(w.embeddings[cb].row(id as usize)) {
                        *a += b;
                    }
                }
                e
            }
        })
        .collect();
    let n = x.len();
    for l in &w.layers {
        let h: Vec<Vec<f32>> = x
            .iter()
            .map(|r| ln(r, &l.attn_norm.gamma, &l.attn_norm.beta))
            .collect();
        let q: Vec<_> = h.iter().map(|r| mv(&l.q_proj, r)).collect();
        let k: Vec<_> = h.iter().map(|r| mv(&l.k_proj, r)).collect();
        let v: Vec<_> = h.iter().map(|r| mv(&l.v_proj, r)).collect();
        for t in 0..n {
            let lo = (t + 1).saturating_sub(c.attention_window);
            let mut ctx = vec![0.0f32; d];
            for head in 0..c.num_heads {
                let cols = head * hd..(head + 1) * hd;
                let s: Vec<f32> = (lo..=t)
                    .map(|j| {
                        q[t][cols.clone()]
                            .iter()
                            .zip(&k[j][cols.clone()])
                            .map(|(a, b)| a * b)
                            .sum::<f32>()
                            / (hd as f32).sqrt()
                    })
                    .collect();
                let m = s.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                let e: Vec<f32> = s.iter().map(|v| (v - m).exp()).collect();
                let z: f32 = e.iter().sum();
                for (i, j) in (lo..=t).enumerate() {
                    for col in cols.clone() {
                        ctx[col] += e[i] / z * v[j][col];
                    }
                }
            }
            let o = mv(&l.o_proj, &ctx);
            x[t].iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
        for r in x.iter_mut() {
            let h = ln(r, &l.ffn_norm.gamma, &l.ffn_norm.beta);
            let u: Vec<f32> = mv(&l.ffn_up, &h).into_iter().map(gelu).collect();
            r.iter_mut()
                .zip(mv(&l.ffn_down, &u))
                .for_each(|(a, b)| *a += b);
        }
    }
    let mut out = Vec::new();
    for r in &x {
        let h = ln(r, &w.final_norm.gamma, &w.final_norm.beta);
        let a: Vec<f32> = mv(&w.head.linear1, &h)
            .into_iter()
            .zip(&w.head.bias1)
            .map(|(v, b)| gelu(v + b))
            .collect();
        out.extend(mv(&w.head.linear2, &a));
    }
    out
}

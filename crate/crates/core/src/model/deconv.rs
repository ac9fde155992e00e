//! Transposed-convolution upsampling baseline.
//!
//! A reference stack of 1-D transposed convolutions that turns one latent
//! frame into `Π strides` samples, used to compare cost and latency against
//! the two-linear head. It is a plain scatter implementation with no
//! blocking or vectorisation tricks.
//!
//! Streaming recomputes the stack over the last `context_frames` latents and
//! keeps the samples belonging to the newest frame. Each layer's output is
//! trimmed to `input_len × stride`, dropping the kernel tail that would spill
//! into the next frame, so the stack is causal.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::decoder::attention_span;
use crate::numerics::{gelu_in_place, macs, Rng, Tensor2D};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeconvConfig {
    pub in_channels: usize,
    /// Output channels per layer; the last must be 1.
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernels: Vec<usize>,
    /// Past frames (current included) fed to the stack per step.
    pub context_frames: usize,
}

impl DeconvConfig {
    /// Strides (8, 6, 5, 8) → 1920 samples per frame, kernels twice the
    /// stride, widths 288/160/96/1. Roughly parameter-matched to the default
    /// two-linear head (≈3.07M vs ≈3.04M).
    pub fn reference(in_channels: usize, context_frames: usize) -> Self {
        Self {
            in_channels,
            channels: vec![288, 160, 96, 1],
            strides: vec![8, 6, 5, 8],
            kernels: vec![16, 12, 10, 16],
            context_frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        if n == 0 || self.strides.len() != n || self.kernels.len() != n {
            return Err(Error::Config(
                "deconv layer lists must be non-empty and equal length".into(),
            ));
        }
        if self.channels.last() != Some(&1) {
            return Err(Error::Config(
                "last deconv layer must have one channel".into(),
            ));
        }
        let all = self
            .channels
            .iter()
            .chain(&self.strides)
            .chain(&self.kernels);
        if self.in_channels == 0 || self.context_frames == 0 || all.into_iter().any(|&v| v == 0) {
            return Err(Error::Config("deconv sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn samples_per_frame(&self) -> usize {
        self.strides.iter().product()
    }

    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let ins = std::iter::once(self.in_channels).chain(self.channels.iter().copied());
        ins.zip(&self.channels)
            .zip(self.strides.iter().zip(&self.kernels))
            .map(|((cin, &cout), (&s, &k))| (cin, cout, s, k))
    }

    pub fn param_count(&self) -> u64 {
        self.layer_dims()
            .map(|(cin, cout, _, k)| (cin * cout * k + cout) as u64)
            .sum()
    }
}

/// MACs of one trimmed transposed convolution over `len` inputs:
/// `cin·cout·Σ_{j=1..len} min(k, j·s)`.
fn conv_transpose_macs(cin: usize, cout: usize, stride: usize, kernel: usize, len: usize) -> u64 {
    let m = len.min(kernel / stride) as u64;
    let (s, k, l) = (stride as u64, kernel as u64, len as u64);
    let taps = s * m * (m + 1) / 2 + (l - m) * k;
    cin as u64 * cout as u64 * taps
}

/// MACs of one streaming step with a full context window.
pub fn deconv_flops_per_frame(config: &DeconvConfig) -> u64 {
    deconv_flops_at(config, config.context_frames)
}

/// MACs of running the stack over `frames` input frames.
pub fn deconv_flops_at(config: &DeconvConfig, frames: usize) -> u64 {
    let mut len = frames;
    let mut total = 0;
    for (cin, cout, s, k) in config.layer_dims() {
        total += conv_transpose_macs(cin, cout, s, k, len);
        len *= s;
    }
    total
}

/// One transposed 1-D convolution; weight indexed `[cin][cout][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvTranspose1d {
    /// `input` is `in_channels × len`; returns `out_channels × len·stride`:
    /// `y[co][i·s + kk] = b[co] + Σ_ci Σ_{i,kk} x[ci][i] · w[ci][co][kk]`.
    pub fn forward(&self, input: &Tensor2D) -> Result<Tensor2D> {
        if input.rows() != self.in_channels {
            return Err(Error::Shape(format!(
                "deconv expects {} channels, got {}",
                self.in_channels,
                input.rows()
            )));
        }
        let len = input.cols();
        let out_len = len * self.stride;
        let mut out = Tensor2D::zeros(self.out_channels, out_len);
        for co in 0..self.out_channels {
            out.row_mut(co).fill(self.bias[co]);
        }
        let mut executed = 0;
        for ci in 0..self.in_channels {
            let x = input.row(ci);
            for co in 0..self.out_channels {
                let w = &self.weight[(ci * self.out_channels + co) * self.kernel..][..self.kernel];
                let y = out.row_mut(co);
                for (i, &xv) in x.iter().enumerate() {
                    let base = i * self.stride;
                    let taps = self.kernel.min(out_len - base);
                    executed += taps;
                    for (yv, wv) in y[base..base + taps].iter_mut().zip(w) {
                        *yv += xv * wv;
                    }
                }
            }
        }
        macs::add(executed);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeconvWeights {
    pub config: DeconvConfig,
    pub layers: Vec<ConvTranspose1d>,
}

impl DeconvWeights {
    /// Uniform init with bound `sqrt(stride / (cin·k))`, zero biases.
    pub fn init_random(config: &DeconvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let layers = config
            .layer_dims()
            .map(|(cin, cout, s, k)| {
                let bound = (s as f32 / (cin * k) as f32).sqrt();
                ConvTranspose1d {
                    in_channels: cin,
                    out_channels: cout,
                    kernel: k,
                    stride: s,
                    weight: (0..cin * cout * k)
                        .map(|_| rng.uniform_symmetric(bound))
                        .collect(),
                    bias: vec![0.0; cout],
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    /// Runs the whole stack over `latents` (`frames × in_channels`),
    /// returning `frames × samples_per_frame` samples.
    pub fn run_stack(&self, latents: &Tensor2D) -> Result<Vec<f32>> {
        if latents.cols() != self.config.in_channels {
            return Err(Error::Shape(format!(
                "latents of width {} for {} channels",
                latents.cols(),
                self.config.in_channels
            )));
        }
        let mut x = Tensor2D::zeros(latents.cols(), latents.rows());
        for t in 0..latents.rows() {
            for (c, &v) in latents.row(t).iter().enumerate() {
                x.set(c, t, v);
            }
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x)?;
            if i != last {
                gelu_in_place(x.data_mut());
            }
        }
        Ok(x.into_vec())
    }
}

/// Streaming deconvolution over a sequence: frame `t` is produced from the
/// latents of frames `t - context + 1 ..= t`.
pub fn deconv_forward(latents: &Tensor2D, weights: &DeconvWeights) -> Result<Vec<f32>> {
    if latents.rows() == 0 {
        return Err(Error::Empty("frame sequence"));
    }
    let mut stream = DeconvStream::new(weights.clone());
    let mut out = Vec::with_capacity(latents.rows() * weights.config.samples_per_frame());
    for t in 0..latents.rows() {
        out.extend(stream.step(latents.row(t))?);
    }
    Ok(out)
}

/// Incremental form of [`deconv_forward`].
#[derive(Clone, Debug)]
pub struct DeconvStream {
    weights: DeconvWeights,
    history: VecDeque<Vec<f32>>,
    position: usize,
}

impl DeconvStream {
    pub fn new(weights: DeconvWeights) -> Self {
        Self {
            weights,
            history: VecDeque::new(),
            position: 0,
        }
    }

    pub fn step(&mut self, latent: &[f32]) -> Result<Vec<f32>> {
        let ctx = self.weights.config.context_frames;
        if self.history.len() == ctx {
            self.history.pop_front();
        }
        self.history.push_back(latent.to_vec());
        debug_assert_eq!(self.history.len(), attention_span(self.position, ctx).len());
        self.position += 1;
        let rows: Vec<Vec<f32>> = self.history.iter().cloned().collect();
        let all = self.weights.run_stack(&Tensor2D::from_rows(&rows)?)?;
        let spf = self.weights.config.samples_per_frame();
        Ok(all[all.len() - spf..].to_vec())
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.position = 0;
    }
}

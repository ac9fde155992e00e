//! Dense f32 kernels and the deterministic generator everything else builds on.
//!
//! Every reduction accumulates in f32, left to right over the inner
//! dimension, without fused multiply-add. The row-blocked kernels below keep
//! one accumulator per output element, so they produce the same bits as a
//! plain triple loop.

use std::cell::Cell;

use crate::error::{Error, Result};

/// Row-major 2-D f32 tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a tensor from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn row_vector(values: Vec<f32>) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn random_uniform(rows: usize, cols: usize, bound: f32, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.uniform_symmetric(bound))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor2D) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "add {:?} + {:?}",
                self.shape(),
                other.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// SplitMix64 (Steele, Lea & Flood 2014), bit-exact on every platform:
///
/// ```text
/// state = state + 0x9E3779B97F4A7C15            (wrapping)
/// z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// out = z ^ (z >> 31)
/// ```
///
/// Floats take the top 24 bits: `(out >> 40) as f32 * 2^-24` in `[0, 1)`.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` on a 2^-24 grid.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / 16_777_216.0)
    }

    /// Uniform in `[-bound, bound]`; `|x| <= bound` holds exactly.
    pub fn uniform_symmetric(&mut self, bound: f32) -> f32 {
        (2.0 * self.next_f32() - 1.0) * bound
    }

    /// Uniform integer in `[0, n)` (multiply-shift reduction).
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Derives an independent generator, e.g. one per tensor.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-accumulate counter for the current thread.
///
/// The dense kernels and the attention loops add one per multiply-add they
/// execute. Used to check the analytic cost model against real executions.
pub mod macs {
    use super::MACS;

    pub fn reset() {
        MACS.with(|c| c.set(0));
    }

    pub fn get() -> u64 {
        MACS.with(|c| c.get())
    }

    pub(crate) fn add(n: usize) {
        MACS.with(|c| c.set(c.get() + n as u64));
    }
}

/// Sequential dot product.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    macs::add(a.len());
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Standard product `a · b`.
pub fn matmul(a: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Tensor2D::zeros(m, n);
    let mut column = vec![0.0f32; k];
    for j in 0..n {
        for (p, c) in column.iter_mut().enumerate() {
            *c = b.data[p * n + j];
        }
        for i in 0..m {
            out.data[i * n + j] = dot(a.row(i), &column);
        }
    }
    Ok(out)
}

/// `x · wᵀ (+ bias)` where `w` is stored as `out_features × in_features`.
///
/// Output channels are processed four at a time with independent
/// accumulators; each accumulator still walks the input left to right, so
/// the result matches `dot(x_row, w_row)` bit for bit.
pub fn linear(x: &Tensor2D, w: &Tensor2D, bias: Option<&[f32]>) -> Result<Tensor2D> {
    if x.cols != w.cols {
        return Err(Error::Shape(format!(
            "linear input {:?} against weight {:?}",
            x.shape(),
            w.shape()
        )));
    }
    if let Some(b) = bias {
        if b.len() != w.rows {
            return Err(Error::Shape(format!(
                "bias of {} for {} outputs",
                b.len(),
                w.rows
            )));
        }
    }
    let mut out = Tensor2D::zeros(x.rows, w.rows);
    for r in 0..x.rows {
        linear_row(x.row(r), w, bias, out.row_mut(r));
    }
    Ok(out)
}

/// Single-row form of [`linear`], writing into `out`.
pub fn linear_row(x: &[f32], w: &Tensor2D, bias: Option<&[f32]>, out: &mut [f32]) {
    let n = w.cols;
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), w.rows);
    macs::add(n * w.rows);
    let mut o = 0;
    while o + 4 <= w.rows {
        let w0 = &w.data[o * n..(o + 1) * n];
        let w1 = &w.data[(o + 1) * n..(o + 2) * n];
        let w2 = &w.data[(o + 2) * n..(o + 3) * n];
        let w3 = &w.data[(o + 3) * n..(o + 4) * n];
        let (mut a0, mut a1, mut a2, mut a3) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
        for k in 0..n {
            let xv = x[k];
            a0 += xv * w0[k];
            a1 += xv * w1[k];
            a2 += xv * w2[k];
            a3 += xv * w3[k];
        }
        out[o] = a0;
        out[o + 1] = a1;
        out[o + 2] = a2;
        out[o + 3] = a3;
        o += 4;
    }
    while o < w.rows {
        let mut acc = 0.0f32;
        for (xv, wv) in x.iter().zip(&w.data[o * n..(o + 1) * n]) {
            acc += xv * wv;
        }
        out[o] = acc;
        o += 1;
    }
    if let Some(b) = bias {
        for (v, b) in out.iter_mut().zip(b) {
            *v += b;
        }
    }
}

pub const DEFAULT_LAYER_NORM_EPS: f32 = 1e-5;

/// Per-row normalisation to zero mean and unit variance, then `gamma * x + beta`.
pub fn layer_norm(x: &Tensor2D, gamma: &[f32], beta: &[f32], eps: f32) -> Result<Tensor2D> {
    if gamma.len() != x.cols || beta.len() != x.cols {
        return Err(Error::Shape(format!(
            "layer norm over {} columns with gamma {} / beta {}",
            x.cols,
            gamma.len(),
            beta.len()
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Invalid(format!("layer norm eps {eps}")));
    }
    let mut out = Tensor2D::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        layer_norm_row(x.row(r), gamma, beta, eps, out.row_mut(r));
    }
    Ok(out)
}

pub fn layer_norm_row(x: &[f32], gamma: &[f32], beta: &[f32], eps: f32, out: &mut [f32]) {
    let n = x.len() as f32;
    let mut sum = 0.0f32;
    for v in x {
        sum += v;
    }
    let mean = sum / n;
    let mut var = 0.0f32;
    for v in x {
        let d = v - mean;
        var += d * d;
    }
    var /= n;
    let inv = 1.0 / (var + eps).sqrt();
    for i in 0..x.len() {
        out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    }
}

/// Boolean mask; `true` marks an entry that participates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, allowed: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(allowed(r, c));
            }
        }
        Self {
            rows,
            cols,
            allowed: data,
        }
    }

    pub fn allowed(&self, r: usize, c: usize) -> bool {
        self.allowed[r * self.cols + c]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Row softmax with max subtraction. Masked entries come out as exactly 0.
pub fn softmax_rows(x: &Tensor2D, mask: Option<&Mask>) -> Result<Tensor2D> {
    if let Some(m) = mask {
        if m.shape() != x.shape() {
            return Err(Error::Shape(format!(
                "mask {:?} for scores {:?}",
                m.shape(),
                x.shape()
            )));
        }
    }
    let mut out = Tensor2D::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        let keep = |c: usize| mask.is_none_or(|m| m.allowed(r, c));
        let row = x.row(r);
        let mut max = f32::NEG_INFINITY;
        let mut any = false;
        for (c, &v) in row.iter().enumerate() {
            if keep(c) {
                any = true;
                max = max.max(v);
            }
        }
        if !any {
            return Err(Error::FullyMasked(r));
        }
        let dst = out.row_mut(r);
        let mut sum = 0.0f32;
        for (c, &v) in row.iter().enumerate() {
            if keep(c) {
                let e = (v - max).exp();
                dst[c] = e;
                sum += e;
            }
        }
        for v in dst.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// In-place softmax of a dense slice (no mask), same arithmetic as [`softmax_rows`].
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

const GELU_SQRT_2_OVER_PI: f32 = 0.797_884_6;
const GELU_CUBIC: f32 = 0.044_715;

/// Tanh-approximated GELU:
/// `0.5 * x * (1 + tanh(0.7978846 * (x + 0.044715 * x^3)))`, all in f32.
#[inline]
pub fn gelu_scalar(x: f32) -> f32 {
    let inner = GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    0.5 * x * (1.0 + inner.tanh())
}

pub fn gelu(x: &Tensor2D) -> Tensor2D {
    let mut out = x.clone();
    gelu_in_place(out.data_mut());
    out
}

pub fn gelu_in_place(xs: &mut [f32]) {
    for v in xs {
        *v = gelu_scalar(*v);
    }
}

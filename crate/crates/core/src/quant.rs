//! Symmetric integer weight quantization and fake-quant transforms.
//!
//! All schemes are symmetric (zero-point 0): `w ≈ q * scale` with
//! `q ∈ [-qmax, qmax]`, `qmax = 127` for int8 and `7` for int4. Rounding is
//! half-away-from-zero on the exact quotient `w / scale`. A channel or group
//! whose entries are all zero gets `scale = 1` and zero codes.
//!
//! Scales are snapped to a fixed point of `s ↦ (qmax·s)/qmax` in f32, which
//! makes `quantize ∘ dequantize ∘ quantize` reproduce the same codes and
//! scales bit for bit.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::Tensor2D;

pub const INT8_QMAX: i8 = 127;
pub const INT4_QMAX: i8 = 7;
pub const DEFAULT_GROUP_SIZE: usize = 32;

/// Weight storage scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantScheme {
    Fp32,
    /// One scale per output channel (weight row).
    Int8PerChannel,
    /// One scale per run of `group_size` consecutive weights along a row.
    /// The last group of a row is shorter when `group_size` does not divide
    /// the row length.
    Int4GroupWise {
        group_size: usize,
    },
}

impl QuantScheme {
    pub const INT4_DEFAULT: QuantScheme = QuantScheme::Int4GroupWise {
        group_size: DEFAULT_GROUP_SIZE,
    };

    pub fn bits(self) -> u32 {
        match self {
            QuantScheme::Fp32 => 32,
            QuantScheme::Int8PerChannel => 8,
            QuantScheme::Int4GroupWise { .. } => 4,
        }
    }

    pub fn is_quantized(self) -> bool {
        !matches!(self, QuantScheme::Fp32)
    }

    fn qmax(self) -> Option<i8> {
        match self {
            QuantScheme::Fp32 => None,
            QuantScheme::Int8PerChannel => Some(INT8_QMAX),
            QuantScheme::Int4GroupWise { .. } => Some(INT4_QMAX),
        }
    }

    /// Number of scales stored for a `rows × cols` weight.
    pub fn scale_count(self, rows: usize, cols: usize) -> usize {
        match self {
            QuantScheme::Fp32 => 0,
            QuantScheme::Int8PerChannel => rows,
            QuantScheme::Int4GroupWise { group_size } => rows * cols.div_ceil(group_size),
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantScheme::Fp32 => f.write_str("fp32"),
            QuantScheme::Int8PerChannel => f.write_str("int8"),
            QuantScheme::Int4GroupWise { group_size } => write!(f, "int4g{group_size}"),
        }
    }
}

/// Integer codes plus scales for one weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    values: Vec<i8>,
    scales: Vec<f32>,
    scheme: QuantScheme,
}

impl QuantizedTensor {
    /// Reassembles a tensor from stored parts, checking every invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        values: Vec<i8>,
        scales: Vec<f32>,
        scheme: QuantScheme,
    ) -> Result<Self> {
        let qmax = scheme
            .qmax()
            .ok_or_else(|| Error::Invalid("fp32 is not an integer scheme".into()))?;
        if let QuantScheme::Int4GroupWise { group_size: 0 } = scheme {
            return Err(Error::Invalid("group size 0".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} codes for {rows}x{cols}",
                values.len()
            )));
        }
        if scales.len() != scheme.scale_count(rows, cols) {
            return Err(Error::Shape(format!(
                "{} scales, {scheme} on {rows}x{cols} needs {}",
                scales.len(),
                scheme.scale_count(rows, cols)
            )));
        }
        if let Some(v) = values.iter().find(|v| v.unsigned_abs() > qmax as u8) {
            return Err(Error::Invalid(format!("code {v} outside ±{qmax}")));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Invalid(format!("scale {s} not positive and finite")));
        }
        Ok(Self {
            rows,
            cols,
            values,
            scales,
            scheme,
        })
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

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn scheme(&self) -> QuantScheme {
        self.scheme
    }

    fn group_width(&self) -> usize {
        match self.scheme {
            QuantScheme::Int4GroupWise { group_size } => group_size,
            _ => self.cols.max(1),
        }
    }

    /// Scale applied to element `(r, c)`.
    pub fn scale_at(&self, r: usize, c: usize) -> f32 {
        let g = self.group_width();
        self.scales[r * self.cols.div_ceil(g) + c / g]
    }
}

/// Smallest-magnitude scale that maps `max_abs` onto `qmax`, snapped to a
/// fixed point of the dequantize/requantize round trip. `None` for an
/// all-zero (or underflowing) block.
fn symmetric_scale(max_abs: f32, qmax: i8) -> Option<f32> {
    let q = qmax as f32;
    let mut s = max_abs / q;
    if s <= 0.0 || !s.is_normal() {
        return None;
    }
    for _ in 0..8 {
        let next = (q * s) / q;
        if next == s {
            break;
        }
        s = next;
    }
    Some(s)
}

#[inline]
fn quantize_value(w: f32, scale: f32, qmax: i8) -> i8 {
    let q = (w as f64 / scale as f64).round();
    q.clamp(-(qmax as f64), qmax as f64) as i8
}

/// Quantizes `[start, end)` of `row` into `codes`, returning the block scale.
fn quantize_block(row: &[f32], codes: &mut [i8], qmax: i8) -> f32 {
    let max_abs = row.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    match symmetric_scale(max_abs, qmax) {
        Some(s) => {
            for (c, &w) in codes.iter_mut().zip(row) {
                *c = quantize_value(w, s, qmax);
            }
            s
        }
        None => {
            codes.fill(0);
            1.0
        }
    }
}

fn check_finite(w: &Tensor2D) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("quantization input"))
    }
}

/// Per-output-channel symmetric int8: one scale per row, `max|row| / 127`.
pub fn quantize_per_channel_int8(w: &Tensor2D) -> Result<QuantizedTensor> {
    quantize_per_channel(w, INT8_QMAX).map(|(values, scales)| QuantizedTensor {
        rows: w.rows(),
        cols: w.cols(),
        values,
        scales,
        scheme: QuantScheme::Int8PerChannel,
    })
}

/// Per-output-channel symmetric int4. Stored as a group-wise tensor whose
/// single group spans the row.
pub fn quantize_per_channel_int4(w: &Tensor2D) -> Result<QuantizedTensor> {
    quantize_per_channel(w, INT4_QMAX).map(|(values, scales)| QuantizedTensor {
        rows: w.rows(),
        cols: w.cols(),
        values,
        scales,
        scheme: QuantScheme::Int4GroupWise {
            group_size: w.cols().max(1),
        },
    })
}

fn quantize_per_channel(w: &Tensor2D, qmax: i8) -> Result<(Vec<i8>, Vec<f32>)> {
    check_finite(w)?;
    let mut values = vec![0i8; w.rows() * w.cols()];
    let mut scales = Vec::with_capacity(w.rows());
    for r in 0..w.rows() {
        let codes = &mut values[r * w.cols()..(r + 1) * w.cols()];
        scales.push(quantize_block(w.row(r), codes, qmax));
    }
    Ok((values, scales))
}

/// Group-wise symmetric int4 along each row: scale `max|group| / 7`.
pub fn quantize_group_int4(w: &Tensor2D, group_size: usize) -> Result<QuantizedTensor> {
    check_finite(w)?;
    if group_size == 0 {
        return Err(Error::Invalid("group size must be at least 1".into()));
    }
    let (rows, cols) = w.shape();
    let mut values = vec![0i8; rows * cols];
    let mut scales = Vec::with_capacity(rows * cols.div_ceil(group_size));
    for r in 0..rows {
        let row = w.row(r);
        let codes = &mut values[r * cols..(r + 1) * cols];
        for (src, dst) in row.chunks(group_size).zip(codes.chunks_mut(group_size)) {
            scales.push(quantize_block(src, dst, INT4_QMAX));
        }
    }
    Ok(QuantizedTensor {
        rows,
        cols,
        values,
        scales,
        scheme: QuantScheme::Int4GroupWise { group_size },
    })
}

/// Quantizes with the given scheme; `None` for [`QuantScheme::Fp32`].
pub fn quantize(w: &Tensor2D, scheme: QuantScheme) -> Result<Option<QuantizedTensor>> {
    match scheme {
        QuantScheme::Fp32 => Ok(None),
        QuantScheme::Int8PerChannel => quantize_per_channel_int8(w).map(Some),
        QuantScheme::Int4GroupWise { group_size } => quantize_group_int4(w, group_size).map(Some),
    }
}

/// `code * scale` for every element.
pub fn dequantize(q: &QuantizedTensor) -> Tensor2D {
    let mut out = Tensor2D::zeros(q.rows, q.cols);
    let g = q.group_width();
    let groups_per_row = q.cols.div_ceil(g);
    for r in 0..q.rows {
        let dst = out.row_mut(r);
        let codes = &q.values[r * q.cols..(r + 1) * q.cols];
        for (gi, (d, c)) in dst.chunks_mut(g).zip(codes.chunks(g)).enumerate() {
            let s = q.scales[r * groups_per_row + gi];
            for (d, &c) in d.iter_mut().zip(c) {
                *d = c as f32 * s;
            }
        }
    }
    out
}

/// Quantize-then-dequantize; identity for `Fp32`.
pub fn fake_quant(w: &Tensor2D, scheme: QuantScheme) -> Result<Tensor2D> {
    Ok(match quantize(w, scheme)? {
        Some(q) => dequantize(&q),
        None => w.clone(),
    })
}

/// Per-row (per-token) dynamic int8 fake-quant of activations.
pub fn dynamic_quant_activations(x: &Tensor2D) -> Tensor2D {
    let mut out = x.clone();
    for r in 0..out.rows() {
        dynamic_quant_row(out.row_mut(r));
    }
    out
}

/// In-place form of [`dynamic_quant_activations`] for one row.
pub fn dynamic_quant_row(row: &mut [f32]) {
    let max_abs = row.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    match symmetric_scale(max_abs, INT8_QMAX) {
        Some(s) => {
            for v in row.iter_mut() {
                *v = quantize_value(*v, s, INT8_QMAX) as f32 * s;
            }
        }
        None => row.fill(0.0),
    }
}

/// Packs int4 codes two per byte, low nibble first.
pub fn pack_int4(values: &[i8]) -> Vec<u8> {
    values
        .chunks(2)
        .map(|pair| {
            let lo = (pair[0] as u8) & 0x0F;
            let hi = pair.get(1).map_or(0, |&v| (v as u8) & 0x0F);
            lo | (hi << 4)
        })
        .collect()
}

/// Inverse of [`pack_int4`]; `count` codes are read.
pub fn unpack_int4(bytes: &[u8], count: usize) -> Vec<i8> {
    let sign_extend = |n: u8| ((n << 4) as i8) >> 4;
    (0..count)
        .map(|i| {
            let b = bytes[i / 2];
            sign_extend(if i % 2 == 0 { b & 0x0F } else { b >> 4 })
        })
        .collect()
}

//! `TMIM` weight container.
//!
//! Little-endian throughout. See `docs/weights-format.md` for the full
//! description; in short:
//!
//! ```text
//! "TMIM" | version u32 | config (12 × 4 bytes) | plan: u32 len + utf-8
//! | tensor count u32 | tensor table | payload | CRC-32 of everything before it
//! ```
//!
//! Table entry: `name_len u32, name, dtype u8 (0 f32, 1 i8, 2 i4 packed),
//! rows u32, cols u32, has_scales u8, group_size u32, offset u64, length u64`.
//! Offsets are relative to the payload start and tensors are laid out back
//! to back in table order. A quantized blob is its codes (int4 two per byte,
//! low nibble first) followed by its f32 scales.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::config::{Activation, DecoderConfig};
use crate::error::{Error, FormatError, Result};
use crate::model::layout::{tensor_specs, Role};
use crate::model::weights::TensorRef;
use crate::model::{DecoderWeights, LinearWeight};
use crate::numerics::Tensor2D;
use crate::plan::PrecisionPlan;
use crate::quant::{pack_int4, unpack_int4, QuantScheme, QuantizedTensor};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TMIM";
pub const FORMAT_VERSION: u32 = 1;

const CONFIG_LEN: usize = 12 * 4;
const MAX_NAME_LEN: usize = 256;
/// Smallest possible table entry (empty name).
const MIN_ENTRY_LEN: usize = 4 + 1 + 4 + 4 + 1 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Dtype {
    F32 = 0,
    I8 = 1,
    I4 = 2,
}

impl Dtype {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::I8),
            2 => Some(Dtype::I4),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::I8 => "i8",
            Dtype::I4 => "i4",
        }
    }

    fn for_scheme(s: QuantScheme) -> Self {
        match s {
            QuantScheme::Fp32 => Dtype::F32,
            QuantScheme::Int8PerChannel => Dtype::I8,
            QuantScheme::Int4GroupWise { .. } => Dtype::I4,
        }
    }
}

fn encode_config(c: &DecoderConfig, out: &mut Vec<u8>) -> Result<()> {
    let u = |v: usize| u32::try_from(v).map_err(|_| Error::Config(format!("{v} exceeds u32")));
    for v in [
        u(c.num_layers)?,
        u(c.model_dim)?,
        u(c.ffn_dim)?,
        u(c.num_heads)?,
        u(c.attention_window)?,
        u(c.head_hidden_dim)?,
        u(c.samples_per_frame)?,
        c.sample_rate,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.frame_rate.to_le_bytes());
    for v in [
        u(c.num_codebooks)?,
        u(c.codebook_size)?,
        c.activation.code(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Serializes `weights` stored at the precision `plan` prescribes.
pub fn to_bytes(weights: &DecoderWeights, plan: &PrecisionPlan) -> Result<Vec<u8>> {
    let config = &weights.config;
    config.validate()?;
    plan.check(config)?;
    let stored = weights.quantized(plan)?;

    let mut table = Vec::new();
    let mut payload = Vec::new();
    let mut count = 0u32;
    stored.for_each_tensor(|name, t| {
        let start = payload.len();
        let (dtype, rows, cols, scales, group) = match t {
            TensorRef::Table(d) | TensorRef::Linear(LinearWeight::Dense(d)) => {
                d.data()
                    .iter()
                    .for_each(|v| payload.extend_from_slice(&v.to_le_bytes()));
                (Dtype::F32, d.rows(), d.cols(), false, 0)
            }
            TensorRef::Vector(v) => {
                v.iter()
                    .for_each(|x| payload.extend_from_slice(&x.to_le_bytes()));
                (Dtype::F32, 1, v.len(), false, 0)
            }
            TensorRef::Linear(LinearWeight::Quantized(q)) => {
                let (dtype, group) = match q.scheme() {
                    QuantScheme::Int4GroupWise { group_size } => {
                        payload.extend_from_slice(&pack_int4(q.values()));
                        (Dtype::I4, group_size)
                    }
                    _ => {
                        payload.extend(q.values().iter().map(|&v| v as u8));
                        (Dtype::I8, 0)
                    }
                };
                q.scales()
                    .iter()
                    .for_each(|s| payload.extend_from_slice(&s.to_le_bytes()));
                (dtype, q.rows(), q.cols(), true, group)
            }
        };
        let name_bytes = name.as_bytes();
        table.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        table.extend_from_slice(name_bytes);
        table.push(dtype as u8);
        table.extend_from_slice(&(rows as u32).to_le_bytes());
        table.extend_from_slice(&(cols as u32).to_le_bytes());
        table.push(scales as u8);
        table.extend_from_slice(&(group as u32).to_le_bytes());
        table.extend_from_slice(&(start as u64).to_le_bytes());
        table.extend_from_slice(&((payload.len() - start) as u64).to_le_bytes());
        count += 1;
        Ok(())
    })?;

    let plan_text = plan.to_string();
    let mut out = Vec::with_capacity(64 + plan_text.len() + table.len() + payload.len());
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    encode_config(config, &mut out)?;
    out.extend_from_slice(&(plan_text.len() as u32).to_le_bytes());
    out.extend_from_slice(plan_text.as_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&table);
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Writes the file in one go; nothing is written if serialization fails.
pub fn save(weights: &DecoderWeights, plan: &PrecisionPlan, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(weights, plan)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(DecoderWeights, PrecisionPlan, DecoderConfig)> {
    from_bytes(&std::fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

struct Entry {
    name: String,
    dtype: Dtype,
    rows: usize,
    cols: usize,
    has_scales: bool,
    group_size: usize,
    offset: u64,
    length: u64,
}

fn decode_config(r: &mut Reader) -> Result<DecoderConfig> {
    let mut u = || r.u32().map(|v| v as usize);
    let num_layers = u()?;
    let model_dim = u()?;
    let ffn_dim = u()?;
    let num_heads = u()?;
    let attention_window = u()?;
    let head_hidden_dim = u()?;
    let samples_per_frame = u()?;
    let sample_rate = r.u32()?;
    let frame_rate = r.f32()?;
    let num_codebooks = r.u32()? as usize;
    let codebook_size = r.u32()? as usize;
    let act = r.u32()?;
    let activation = Activation::from_code(act)
        .ok_or_else(|| FormatError::Malformed(format!("unknown activation code {act}")))?;
    let config = DecoderConfig {
        num_layers,
        model_dim,
        ffn_dim,
        num_heads,
        attention_window,
        head_hidden_dim,
        samples_per_frame,
        sample_rate,
        frame_rate,
        num_codebooks,
        codebook_size,
        activation,
    };
    config.validate()?;
    Ok(config)
}

/// Expected blob size, or `None` on overflow.
fn blob_len(e: &Entry, scheme: QuantScheme) -> Option<u64> {
    let n = (e.rows as u64).checked_mul(e.cols as u64)?;
    let codes = match e.dtype {
        Dtype::F32 => n.checked_mul(4)?,
        Dtype::I8 => n,
        Dtype::I4 => n.div_ceil(2),
    };
    let scales = if e.has_scales {
        4 * scheme.scale_count(e.rows, e.cols) as u64
    } else {
        0
    };
    codes.checked_add(scales)
}

/// Parses and fully validates a weight file image.
pub fn from_bytes(bytes: &[u8]) -> Result<(DecoderWeights, PrecisionPlan, DecoderConfig)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != WEIGHTS_MAGIC {
        return Err(FormatError::BadMagic {
            expected: WEIGHTS_MAGIC,
            found: magic,
        }
        .into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    if bytes.len() < 8 + CONFIG_LEN + 4 + 4 + 4 {
        return Err(FormatError::Truncated {
            offset: 8,
            needed: CONFIG_LEN + 12,
            available: bytes.len() - 8,
        }
        .into());
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed }.into());
    }
    let mut r = Reader {
        buf: &bytes[..body_len],
        pos: 8,
    };

    let config = decode_config(&mut r)?;
    let plan_len = r.u32()? as usize;
    let plan_text = std::str::from_utf8(r.take(plan_len)?)
        .map_err(|_| FormatError::Malformed("plan string is not utf-8".into()))?;
    let plan: PrecisionPlan = plan_text.parse()?;
    plan.check(&config)?;

    let count = r.u32()? as usize;
    if count > r.remaining() / MIN_ENTRY_LEN {
        return Err(
            FormatError::Malformed(format!("tensor count {count} exceeds file size")).into(),
        );
    }
    let expected_count = config.num_codebooks + 10 * config.num_layers + 5;
    if count != expected_count {
        return Err(FormatError::Malformed(format!(
            "{count} tensors, architecture has {expected_count}"
        ))
        .into());
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(FormatError::Malformed(format!("tensor name of {name_len} bytes")).into());
        }
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| FormatError::Malformed("tensor name is not utf-8".into()))?
            .to_string();
        let code = r.u8()?;
        let dtype = Dtype::from_code(code)
            .ok_or_else(|| FormatError::Malformed(format!("unknown dtype {code} for `{name}`")))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let has_scales = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(FormatError::Malformed(format!("scale flag {v} for `{name}`")).into()),
        };
        let group_size = r.u32()? as usize;
        let offset = r.u64()?;
        let length = r.u64()?;
        entries.push(Entry {
            name,
            dtype,
            rows,
            cols,
            has_scales,
            group_size,
            offset,
            length,
        });
    }
    let payload = &r.buf[r.pos..];

    // Every entry must carry the dtype the plan prescribes for its owner.
    let specs: HashMap<String, _> = tensor_specs(&config)
        .into_iter()
        .map(|s| (s.name.clone(), s))
        .collect();
    let mut seen = HashSet::new();
    let mut cursor = 0u64;
    let mut tensors = HashMap::with_capacity(count);
    for e in entries {
        let spec = specs
            .get(&e.name)
            .ok_or_else(|| FormatError::UnknownTensor(e.name.clone()))?;
        if !seen.insert(e.name.clone()) {
            return Err(FormatError::DuplicateTensor(e.name).into());
        }
        if (e.rows, e.cols) != (spec.rows, spec.cols) {
            return Err(FormatError::ShapeMismatch {
                name: e.name,
                expected: (spec.rows, spec.cols),
                found: (e.rows, e.cols),
            }
            .into());
        }
        let scheme = match spec.role {
            Role::Linear => plan.scheme_for(spec.owner),
            _ => QuantScheme::Fp32,
        };
        let file_scheme = match e.dtype {
            Dtype::F32 => QuantScheme::Fp32,
            Dtype::I8 => QuantScheme::Int8PerChannel,
            Dtype::I4 => QuantScheme::Int4GroupWise {
                group_size: e.group_size,
            },
        };
        let group_ok = match file_scheme {
            QuantScheme::Int4GroupWise { .. } => true,
            _ => e.group_size == 0,
        };
        if file_scheme != scheme || !group_ok || e.has_scales != scheme.is_quantized() {
            return Err(FormatError::DtypeMismatch {
                name: e.name,
                expected: format!("{} ({scheme})", Dtype::for_scheme(scheme).name()),
                found: format!(
                    "{} (group {}, scales {})",
                    e.dtype.name(),
                    e.group_size,
                    e.has_scales
                ),
            }
            .into());
        }
        let want = blob_len(&e, scheme)
            .ok_or_else(|| FormatError::Malformed(format!("size of `{}` overflows", e.name)))?;
        if e.offset != cursor || e.length != want {
            return Err(FormatError::Malformed(format!(
                "`{}` at {}+{}, expected {}+{}",
                e.name, e.offset, e.length, cursor, want
            ))
            .into());
        }
        let end = cursor + want;
        if end > payload.len() as u64 {
            return Err(FormatError::Truncated {
                offset: cursor as usize,
                needed: want as usize,
                available: payload.len().saturating_sub(cursor as usize),
            }
            .into());
        }
        let blob = &payload[cursor as usize..end as usize];
        cursor = end;
        let n = e.rows * e.cols;
        let weight = match e.dtype {
            Dtype::F32 => {
                let data = blob
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                LinearWeight::Dense(Tensor2D::from_vec(e.rows, e.cols, data)?)
            }
            Dtype::I8 | Dtype::I4 => {
                let (codes, scales) = if e.dtype == Dtype::I8 {
                    (blob[..n].iter().map(|&b| b as i8).collect(), &blob[n..])
                } else {
                    let packed = n.div_ceil(2);
                    (unpack_int4(&blob[..packed], n), &blob[packed..])
                };
                let scales = scales
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                let q = QuantizedTensor::from_parts(e.rows, e.cols, codes, scales, scheme)
                    .map_err(|err| FormatError::Malformed(format!("`{}`: {err}", e.name)))?;
                LinearWeight::Quantized(q)
            }
        };
        tensors.insert(e.name, weight);
    }
    if cursor != payload.len() as u64 {
        return Err(FormatError::TrailingBytes(payload.len() - cursor as usize).into());
    }
    let weights = DecoderWeights::from_tensors(config.clone(), tensors)?;
    Ok((weights, plan, config))
}

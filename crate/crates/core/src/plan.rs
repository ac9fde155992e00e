//! Per-layer precision assignment and storage accounting.
//!
//! Canonical string form, layers numbered from 1:
//!
//! ```text
//! plan   := item ("," item)*
//! item   := "T" a ["-" b] ":" scheme      transformer layers a..=b
//!         | "L:" scheme                   final norm + head linears
//!         | "A:int8"                      dynamic int8 activations
//! scheme := "fp32" | "int8" | "int4g" N   ("int4" = "int4g32")
//! ```
//!
//! Layer ranges must cover `1..=N` exactly once. `Display` merges runs of
//! equal schemes, so parse→display yields the canonical form, e.g.
//! `T1-10:int8,T11-12:fp32,L:fp32`.

use std::fmt;
use std::str::FromStr;

use crate::config::DecoderConfig;
use crate::error::{Error, Result};
use crate::model::layout::{tensor_specs, Owner, Role};
use crate::quant::QuantScheme;

/// Upper bound on layer indices accepted by the parser.
pub const MAX_LAYERS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionPlan {
    pub layer_schemes: Vec<QuantScheme>,
    pub head_scheme: QuantScheme,
    pub activation_quant: bool,
}

impl PrecisionPlan {
    pub fn uniform(num_layers: usize, scheme: QuantScheme) -> Self {
        Self {
            layer_schemes: vec![scheme; num_layers],
            head_scheme: scheme,
            activation_quant: false,
        }
    }

    pub fn fp32(num_layers: usize) -> Self {
        Self::uniform(num_layers, QuantScheme::Fp32)
    }

    /// First `quantized_layers` layers at `scheme`, the rest of the layers
    /// and the head at fp32.
    pub fn fp32_tail(num_layers: usize, quantized_layers: usize, scheme: QuantScheme) -> Self {
        let mut layer_schemes = vec![QuantScheme::Fp32; num_layers];
        for s in layer_schemes.iter_mut().take(quantized_layers) {
            *s = scheme;
        }
        Self {
            layer_schemes,
            head_scheme: QuantScheme::Fp32,
            activation_quant: false,
        }
    }

    /// The six mixed-precision settings of the 12-layer sensitivity study,
    /// ordered by how much of the output side stays at fp32.
    pub fn storage_ladder(num_layers: usize) -> Vec<PrecisionPlan> {
        let int8 = QuantScheme::Int8PerChannel;
        let mut head32 = Self::uniform(num_layers, int8);
        head32.head_scheme = QuantScheme::Fp32;
        vec![
            Self::uniform(num_layers, QuantScheme::INT4_DEFAULT),
            Self::uniform(num_layers, int8),
            head32,
            Self::fp32_tail(num_layers, num_layers.saturating_sub(1), int8),
            Self::fp32_tail(num_layers, num_layers.saturating_sub(2), int8),
            Self::fp32_tail(num_layers, num_layers.saturating_sub(3), int8),
        ]
    }

    pub fn num_layers(&self) -> usize {
        self.layer_schemes.len()
    }

    pub fn is_all_fp32(&self) -> bool {
        self.head_scheme == QuantScheme::Fp32
            && self.layer_schemes.iter().all(|s| *s == QuantScheme::Fp32)
    }

    pub fn scheme_for(&self, owner: Owner) -> QuantScheme {
        match owner {
            Owner::Layer(l) => self.layer_schemes[l],
            Owner::Head => self.head_scheme,
            Owner::Embedding => QuantScheme::Fp32,
        }
    }

    pub fn check(&self, config: &DecoderConfig) -> Result<()> {
        if self.layer_schemes.len() != config.num_layers {
            return Err(Error::Plan {
                plan: self.to_string(),
                reason: format!(
                    "covers {} layers, config has {}",
                    self.layer_schemes.len(),
                    config.num_layers
                ),
            });
        }
        Ok(())
    }

    /// Weight storage in bytes at the plan's bit widths, excluding embedding
    /// tables. Every tensor a layer (or the head) owns is counted at that
    /// owner's width, so an all-int8 plan costs exactly one byte per
    /// parameter. With `include_scales`, each quantized matrix adds 4 bytes
    /// per stored scale.
    pub fn storage_bytes(&self, config: &DecoderConfig, include_scales: bool) -> Result<u64> {
        self.check(config)?;
        let mut total = 0u64;
        for spec in tensor_specs(config) {
            if spec.owner == Owner::Embedding {
                continue;
            }
            let scheme = self.scheme_for(spec.owner);
            total += (spec.numel() as u64 * scheme.bits() as u64).div_ceil(8);
            if include_scales && spec.role == Role::Linear {
                total += 4 * scheme.scale_count(spec.rows, spec.cols) as u64;
            }
        }
        Ok(total)
    }

    /// [`Self::storage_bytes`] in decimal megabytes (10^6 bytes).
    pub fn storage_mb(&self, config: &DecoderConfig, include_scales: bool) -> Result<f64> {
        Ok(self.storage_bytes(config, include_scales)? as f64 / 1e6)
    }
}

fn parse_scheme(s: &str) -> Option<QuantScheme> {
    match s {
        "fp32" => Some(QuantScheme::Fp32),
        "int8" => Some(QuantScheme::Int8PerChannel),
        "int4" => Some(QuantScheme::INT4_DEFAULT),
        _ => {
            let g: usize = s.strip_prefix("int4g")?.parse().ok()?;
            (g > 0).then_some(QuantScheme::Int4GroupWise { group_size: g })
        }
    }
}

impl FromStr for PrecisionPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let fail = |reason: String| Error::Plan {
            plan: text.to_string(),
            reason,
        };
        let mut ranges: Vec<(usize, usize, QuantScheme)> = Vec::new();
        let mut head = None;
        let mut activation_quant = false;
        for item in text.split(',').map(str::trim) {
            let (key, value) = item
                .split_once(':')
                .ok_or_else(|| fail(format!("`{item}` is not KEY:SCHEME")))?;
            if key == "A" {
                if value != "int8" || activation_quant {
                    return Err(fail(format!("bad activation item `{item}`")));
                }
                activation_quant = true;
                continue;
            }
            let scheme =
                parse_scheme(value).ok_or_else(|| fail(format!("unknown scheme `{value}`")))?;
            if key == "L" {
                if head.replace(scheme).is_some() {
                    return Err(fail("head scheme given twice".into()));
                }
                continue;
            }
            let range = key
                .strip_prefix('T')
                .ok_or_else(|| fail(format!("unknown item `{item}`")))?;
            let (a, b) = match range.split_once('-') {
                Some((a, b)) => (a, b),
                None => (range, range),
            };
            let (a, b): (usize, usize) = match (a.parse(), b.parse()) {
                (Ok(a), Ok(b)) if a >= 1 && a <= b && b <= MAX_LAYERS => (a, b),
                _ => return Err(fail(format!("bad layer range `{key}`"))),
            };
            ranges.push((a, b, scheme));
        }
        let head = head.ok_or_else(|| fail("missing `L:` item".into()))?;
        let n = ranges.iter().map(|r| r.1).max().unwrap_or(0);
        let mut layer_schemes = vec![None; n];
        for (a, b, scheme) in ranges {
            for slot in &mut layer_schemes[a - 1..b] {
                if slot.replace(scheme).is_some() {
                    return Err(fail(format!("layer range T{a}-{b} overlaps another")));
                }
            }
        }
        let layer_schemes = layer_schemes
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| fail(format!("layer {} not assigned", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layer_schemes,
            head_scheme: head,
            activation_quant,
        })
    }
}

impl fmt::Display for PrecisionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut start = 0;
        while start < self.layer_schemes.len() {
            let scheme = self.layer_schemes[start];
            let mut end = start;
            while end + 1 < self.layer_schemes.len() && self.layer_schemes[end + 1] == scheme {
                end += 1;
            }
            if end == start {
                write!(f, "T{}:{scheme},", start + 1)?;
            } else {
                write!(f, "T{}-{}:{scheme},", start + 1, end + 1)?;
            }
            start = end + 1;
        }
        write!(f, "L:{}", self.head_scheme)?;
        if self.activation_quant {
            f.write_str(",A:int8")?;
        }
        Ok(())
    }
}

//! Decoder parameters, their storage precision, and the seeded initializer.

use std::collections::HashMap;

use crate::config::DecoderConfig;
use crate::error::{Error, FormatError, Result};
use crate::model::layout::{layer_name, tensor_specs, Role, TensorSpec};
use crate::numerics::{Rng, Tensor2D};
use crate::plan::PrecisionPlan;
use crate::quant::{self, QuantScheme, QuantizedTensor};

/// A linear weight as stored: dense f32 or integer codes with scales.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearWeight {
    Dense(Tensor2D),
    Quantized(QuantizedTensor),
}

impl LinearWeight {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            LinearWeight::Dense(t) => t.shape(),
            LinearWeight::Quantized(q) => q.shape(),
        }
    }

    pub fn scheme(&self) -> QuantScheme {
        match self {
            LinearWeight::Dense(_) => QuantScheme::Fp32,
            LinearWeight::Quantized(q) => q.scheme(),
        }
    }

    pub fn to_dense(&self) -> Tensor2D {
        match self {
            LinearWeight::Dense(t) => t.clone(),
            LinearWeight::Quantized(q) => quant::dequantize(q),
        }
    }

    /// Re-expresses the weight in `scheme`. Already matching weights are
    /// returned unchanged.
    pub fn with_scheme(&self, scheme: QuantScheme) -> Result<LinearWeight> {
        if self.scheme() == scheme {
            return Ok(self.clone());
        }
        let dense = self.to_dense();
        Ok(match quant::quantize(&dense, scheme)? {
            Some(q) => LinearWeight::Quantized(q),
            None => LinearWeight::Dense(dense),
        })
    }

    /// The f32 matrix the forward pass multiplies by under `scheme`
    /// (fake-quantized unless `scheme` is fp32).
    pub fn effective(&self, scheme: QuantScheme) -> Result<Tensor2D> {
        match self {
            LinearWeight::Quantized(q) if q.scheme() == scheme => Ok(quant::dequantize(q)),
            _ => quant::fake_quant(&self.to_dense(), scheme),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormWeights {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub attn_norm: NormWeights,
    pub q_proj: LinearWeight,
    pub k_proj: LinearWeight,
    pub v_proj: LinearWeight,
    pub o_proj: LinearWeight,
    pub ffn_norm: NormWeights,
    pub ffn_up: LinearWeight,
    pub ffn_down: LinearWeight,
}

impl LayerWeights {
    fn linears_mut(&mut self) -> [&mut LinearWeight; 6] {
        [
            &mut self.q_proj,
            &mut self.k_proj,
            &mut self.v_proj,
            &mut self.o_proj,
            &mut self.ffn_up,
            &mut self.ffn_down,
        ]
    }
}

/// Two-linear upsampling head; only the first linear has a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadWeights {
    pub linear1: LinearWeight,
    pub bias1: Vec<f32>,
    pub linear2: LinearWeight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderWeights {
    pub config: DecoderConfig,
    /// One `codebook_size × model_dim` table per codebook.
    pub embeddings: Vec<Tensor2D>,
    pub layers: Vec<LayerWeights>,
    pub final_norm: NormWeights,
    pub head: HeadWeights,
}

/// Borrowed view of one named tensor, in [`tensor_specs`] order.
pub enum TensorRef<'a> {
    Linear(&'a LinearWeight),
    Vector(&'a [f32]),
    Table(&'a Tensor2D),
}

impl DecoderWeights {
    /// Scaled-uniform initialization: every tensor is drawn from
    /// `U[-sqrt(1/fan_in), sqrt(1/fan_in)]` with its own generator forked
    /// from `seed` in tensor order. Norm scales start at 1 and norm shifts
    /// at 0.
    pub fn init_random(config: &DecoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let mut tensors = HashMap::new();
        for spec in tensor_specs(config) {
            let mut sub = rng.fork();
            let t = if spec.role == Role::Vector && spec.name.contains("norm") {
                let fill = if spec.name.ends_with(".weight") {
                    1.0
                } else {
                    0.0
                };
                Tensor2D::from_vec(spec.rows, spec.cols, vec![fill; spec.numel()])?
            } else {
                let bound = (1.0 / spec.fan_in as f32).sqrt();
                Tensor2D::random_uniform(spec.rows, spec.cols, bound, &mut sub)
            };
            tensors.insert(spec.name, LinearWeight::Dense(t));
        }
        Self::from_tensors(config.clone(), tensors)
    }

    /// All parameters zero (norm scales included).
    pub fn zeros(config: &DecoderConfig) -> Result<Self> {
        config.validate()?;
        let tensors = tensor_specs(config)
            .into_iter()
            .map(|s| {
                let t = Tensor2D::zeros(s.rows, s.cols);
                (s.name, LinearWeight::Dense(t))
            })
            .collect();
        Self::from_tensors(config.clone(), tensors)
    }

    /// Assembles weights from named tensors; every tensor of the
    /// architecture must be present with its expected shape, and nothing
    /// else may be.
    pub fn from_tensors(
        config: DecoderConfig,
        mut tensors: HashMap<String, LinearWeight>,
    ) -> Result<Self> {
        config.validate()?;
        let specs: HashMap<String, TensorSpec> = tensor_specs(&config)
            .into_iter()
            .map(|s| (s.name.clone(), s))
            .collect();
        let mut take = |name: &str| -> Result<LinearWeight> {
            let spec = &specs[name];
            let t = tensors
                .remove(name)
                .ok_or_else(|| FormatError::MissingTensor(name.to_string()))?;
            if t.shape() != (spec.rows, spec.cols) {
                return Err(FormatError::ShapeMismatch {
                    name: name.to_string(),
                    expected: (spec.rows, spec.cols),
                    found: t.shape(),
                }
                .into());
            }
            if spec.role != Role::Linear && !matches!(t, LinearWeight::Dense(_)) {
                return Err(FormatError::DtypeMismatch {
                    name: name.to_string(),
                    expected: "f32".into(),
                    found: t.scheme().to_string(),
                }
                .into());
            }
            Ok(t)
        };
        let vector = |t: LinearWeight| t.to_dense().into_vec();
        let table = |t: LinearWeight| t.to_dense();

        let mut embeddings = Vec::with_capacity(config.num_codebooks);
        for c in 0..config.num_codebooks {
            embeddings.push(table(take(&format!("embed.{c}"))?));
        }
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let mut get = |s: &str| take(&layer_name(l, s));
            layers.push(LayerWeights {
                attn_norm: NormWeights {
                    gamma: vector(get("attn_norm.weight")?),
                    beta: vector(get("attn_norm.bias")?),
                },
                q_proj: get("attn.q_proj")?,
                k_proj: get("attn.k_proj")?,
                v_proj: get("attn.v_proj")?,
                o_proj: get("attn.o_proj")?,
                ffn_norm: NormWeights {
                    gamma: vector(get("ffn_norm.weight")?),
                    beta: vector(get("ffn_norm.bias")?),
                },
                ffn_up: get("ffn.up")?,
                ffn_down: get("ffn.down")?,
            });
        }
        let final_norm = NormWeights {
            gamma: vector(take("final_norm.weight")?),
            beta: vector(take("final_norm.bias")?),
        };
        let head = HeadWeights {
            linear1: take("head.linear1.weight")?,
            bias1: vector(take("head.linear1.bias")?),
            linear2: take("head.linear2.weight")?,
        };
        if let Some(extra) = tensors.into_keys().min() {
            return Err(FormatError::UnknownTensor(extra).into());
        }
        let weights = Self {
            config,
            embeddings,
            layers,
            final_norm,
            head,
        };
        if !weights.is_finite() {
            return Err(Error::NonFinite("decoder weights"));
        }
        Ok(weights)
    }

    /// Visits every tensor with its name, in [`tensor_specs`] order.
    pub fn for_each_tensor<'a>(
        &'a self,
        mut f: impl FnMut(&str, TensorRef<'a>) -> Result<()>,
    ) -> Result<()> {
        for (c, t) in self.embeddings.iter().enumerate() {
            f(&format!("embed.{c}"), TensorRef::Table(t))?;
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let name = |s: &str| layer_name(l, s);
            f(
                &name("attn_norm.weight"),
                TensorRef::Vector(&layer.attn_norm.gamma),
            )?;
            f(
                &name("attn_norm.bias"),
                TensorRef::Vector(&layer.attn_norm.beta),
            )?;
            f(&name("attn.q_proj"), TensorRef::Linear(&layer.q_proj))?;
            f(&name("attn.k_proj"), TensorRef::Linear(&layer.k_proj))?;
            f(&name("attn.v_proj"), TensorRef::Linear(&layer.v_proj))?;
            f(&name("attn.o_proj"), TensorRef::Linear(&layer.o_proj))?;
            f(
                &name("ffn_norm.weight"),
                TensorRef::Vector(&layer.ffn_norm.gamma),
            )?;
            f(
                &name("ffn_norm.bias"),
                TensorRef::Vector(&layer.ffn_norm.beta),
            )?;
            f(&name("ffn.up"), TensorRef::Linear(&layer.ffn_up))?;
            f(&name("ffn.down"), TensorRef::Linear(&layer.ffn_down))?;
        }
        f(
            "final_norm.weight",
            TensorRef::Vector(&self.final_norm.gamma),
        )?;
        f("final_norm.bias", TensorRef::Vector(&self.final_norm.beta))?;
        f("head.linear1.weight", TensorRef::Linear(&self.head.linear1))?;
        f("head.linear1.bias", TensorRef::Vector(&self.head.bias1))?;
        f("head.linear2.weight", TensorRef::Linear(&self.head.linear2))?;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        let _ = self.for_each_tensor(|_, t| {
            ok &= match t {
                TensorRef::Linear(LinearWeight::Dense(d)) | TensorRef::Table(d) => d.is_finite(),
                TensorRef::Linear(LinearWeight::Quantized(_)) => true,
                TensorRef::Vector(v) => v.iter().all(|x| x.is_finite()),
            };
            Ok(())
        });
        ok
    }

    /// Copy whose linear weights are stored as the plan prescribes.
    pub fn quantized(&self, plan: &PrecisionPlan) -> Result<Self> {
        plan.check(&self.config)?;
        let mut out = self.clone();
        for (l, layer) in out.layers.iter_mut().enumerate() {
            let scheme = plan.layer_schemes[l];
            for w in layer.linears_mut() {
                *w = w.with_scheme(scheme)?;
            }
        }
        out.head.linear1 = out.head.linear1.with_scheme(plan.head_scheme)?;
        out.head.linear2 = out.head.linear2.with_scheme(plan.head_scheme)?;
        Ok(out)
    }

    /// The plan the stored linear weights currently follow, if they are
    /// uniform within every layer and within the head.
    pub fn storage_plan(&self) -> Option<PrecisionPlan> {
        let mut layer_schemes = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let s = layer.q_proj.scheme();
            let all = [
                &layer.k_proj,
                &layer.v_proj,
                &layer.o_proj,
                &layer.ffn_up,
                &layer.ffn_down,
            ];
            if all.iter().any(|w| w.scheme() != s) {
                return None;
            }
            layer_schemes.push(s);
        }
        let head_scheme = self.head.linear1.scheme();
        (self.head.linear2.scheme() == head_scheme).then_some(PrecisionPlan {
            layer_schemes,
            head_scheme,
            activation_quant: false,
        })
    }

    pub fn param_count(&self) -> u64 {
        crate::model::layout::param_count(&self.config)
    }
}

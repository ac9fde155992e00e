use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use tmimi::frames::{decode_frames, random_token_frames, FrameInput};
use tmimi::metrics::{multiscale_mel_l1, si_sdr, MelConfig};
use tmimi::model::{
    deconv_flops_per_frame, embedding_param_count, flops_per_frame, head_flops_per_frame,
    layer_flops, param_count, tensor_specs, DeconvConfig, DeconvStream, DeconvWeights, Owner,
};
use tmimi::weight_file;
use tmimi::{Decoder, DecoderConfig, DecoderWeights, PrecisionPlan, Preset, StreamState};

use crate::cli::{BenchArgs, Command, DecodeArgs, InfoArgs, InitArgs, ModelArgs, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::pin::pin_to_core;
use crate::report::{
    percentile, BenchReport, ConfigJson, HeadKind, InfoReport, SweepReport, SweepRow,
};
use crate::wav::write_wav;

pub const BUILTIN_LADDER: &str = "builtin-ladder";

pub fn run(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::InitWeights(a) => cmd_init_weights(&a, out),
        Command::Decode(a) => cmd_decode(&a, out),
        Command::StreamBench(a) => cmd_stream_bench(&a, out).map(drop),
        Command::QuantSweep(a) => cmd_quant_sweep(&a, out).map(drop),
        Command::Info(a) => cmd_info(&a, out).map(drop),
    }
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments) -> CliResult<()> {
    out.write_fmt(text).map_err(|e| CliError::io("<stdout>", e))
}

fn emit_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    emit(out, format_args!("{text}\n"))
}

/// A preset name, or a path to a JSON config file.
pub fn resolve_config(spec: &str) -> CliResult<DecoderConfig> {
    if let Ok(p) = spec.parse::<Preset>() {
        return Ok(p.config());
    }
    let path = Path::new(spec);
    if !path.exists() {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        return Err(CliError::Usage(format!(
            "--config `{spec}` is neither a preset ({}) nor an existing file",
            names.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let json: ConfigJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Core(tmimi::Error::Config(format!("{spec}: {e}"))))?;
    Ok(DecoderConfig::try_from(json)?)
}

/// Parses a plan against `config`; any problem is a usage error naming it.
pub fn parse_plan(text: &str, config: &DecoderConfig) -> CliResult<PrecisionPlan> {
    let text = text.trim();
    let plan = if text == "fp32" {
        PrecisionPlan::fp32(config.num_layers)
    } else {
        text.parse::<PrecisionPlan>()
            .map_err(|e| CliError::Usage(format!("plan `{text}`: {e}")))?
    };
    plan.check(config)
        .map_err(|e| CliError::Usage(format!("plan `{text}`: {e}")))?;
    Ok(plan)
}

fn load_weights(path: &Path) -> CliResult<(DecoderWeights, PrecisionPlan)> {
    let (w, p, _) = weight_file::load(path).map_err(|e| CliError::at(path, e))?;
    Ok((w, p))
}

/// Weights and stored plan from a file, or seeded random fp32 weights.
fn load_model(m: &ModelArgs) -> CliResult<(DecoderWeights, Option<PrecisionPlan>)> {
    match &m.weights {
        Some(path) => load_weights(path).map(|(w, p)| (w, Some(p))),
        None => {
            let config = resolve_config(&m.config)?;
            Ok((DecoderWeights::init_random(&config, m.seed)?, None))
        }
    }
}

fn read_frames(path: &Path, config: &DecoderConfig) -> CliResult<Vec<FrameInput>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_frames(&bytes, config).map_err(|e| CliError::at(path, e))
}

pub fn cmd_init_weights(a: &InitArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = resolve_config(&a.config)?;
    let plan = parse_plan(&a.plan, &config)?;
    let weights = DecoderWeights::init_random(&config, a.seed)?;
    weight_file::save(&weights, &plan, &a.out).map_err(|e| CliError::at(&a.out, e))?;
    let params = param_count(&config);
    emit(
        out,
        format_args!(
            "wrote {}\nparams ≈ {:.1}M ({params} excluding {} embedding parameters)\nstorage {:.1} MB at plan {plan}\n",
            a.out.display(),
            params as f64 / 1e6,
            embedding_param_count(&config),
            plan.storage_mb(&config, false)?,
        ),
    )
}

pub fn cmd_decode(a: &DecodeArgs, out: &mut dyn Write) -> CliResult<()> {
    let (weights, plan) = load_weights(&a.weights)?;
    let config = weights.config.clone();
    let frames = match (&a.frames, a.random) {
        (Some(path), _) => read_frames(path, &config)?,
        (None, Some(n)) => random_token_frames(&config, n, a.seed),
        (None, None) => return Err(CliError::Usage("decode needs --frames or --random".into())),
    };
    let mut state = StreamState::new(Arc::new(Decoder::new(&weights, &plan)?));
    let mut samples = Vec::with_capacity(frames.len() * config.samples_per_frame);
    for f in &frames {
        samples.extend(state.step(f)?);
    }
    let mut buf = std::io::Cursor::new(Vec::new());
    write_wav(&mut buf, &samples, config.sample_rate).map_err(|e| match e {
        hound::Error::IoError(e) => CliError::io(&a.out, e),
        other => CliError::Core(tmimi::Error::Invalid(other.to_string())),
    })?;
    std::fs::write(&a.out, buf.into_inner()).map_err(|e| CliError::io(&a.out, e))?;
    emit(
        out,
        format_args!(
            "decoded {} frames → {} samples at {} Hz into {}\n",
            frames.len(),
            samples.len(),
            config.sample_rate,
            a.out.display()
        ),
    )
}

pub fn cmd_stream_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<BenchReport> {
    if a.chunks == 0 {
        return Err(CliError::Usage("--chunks must be at least 1".into()));
    }
    let (weights, stored) = load_model(&a.model)?;
    let config = weights.config.clone();
    let plan = match (&a.plan, stored) {
        (Some(text), _) => parse_plan(text, &config)?,
        (None, Some(p)) => p,
        (None, None) => PrecisionPlan::fp32(config.num_layers),
    };
    let pinned = match a.pin {
        Some(core) => pin_to_core(core)
            .map_err(|e| CliError::Usage(format!("--pin {core}: {e}")))?
            .then_some(core),
        None => None,
    };
    let mut state = StreamState::new(Arc::new(Decoder::new(&weights, &plan)?));
    let transformer_flops =
        config.num_layers as u64 * layer_flops(&config, config.attention_window);
    let mut storage_bytes = plan.storage_bytes(&config, false)?;
    let (mut deconv, head_flops, head_params) = match a.head {
        HeadKind::Transformer => {
            let h = config.head_hidden_dim as u64;
            let params = config.model_dim as u64 * h + h + h * config.samples_per_frame as u64;
            (None, head_flops_per_frame(&config), params)
        }
        HeadKind::Deconv => {
            let dc = DeconvConfig::reference(config.model_dim, a.deconv_context);
            dc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            if dc.samples_per_frame() != config.samples_per_frame {
                return Err(CliError::Usage(format!(
                    "deconv baseline emits {} samples per frame, config needs {}",
                    dc.samples_per_frame(),
                    config.samples_per_frame
                )));
            }
            storage_bytes =
                storage_bytes - linear_head_bytes(&config, &plan) + 4 * dc.param_count();
            let w = DeconvWeights::init_random(&dc, a.model.seed ^ 0x5eed_dec0)?;
            (
                Some(DeconvStream::new(w)),
                deconv_flops_per_frame(&dc),
                dc.param_count(),
            )
        }
    };
    let frames = random_token_frames(&config, a.warmup + a.chunks, a.frame_seed);
    let mut times = Vec::with_capacity(a.chunks);
    for (i, f) in frames.iter().enumerate() {
        let t0 = Instant::now();
        match deconv.as_mut() {
            None => {
                black_box(state.step(f)?);
            }
            Some(d) => {
                let h = state.step_hidden(f)?;
                black_box(d.step(&h)?);
            }
        }
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        if i >= a.warmup {
            times.push(ms);
        }
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let chunk_ms = config.frame_ms();
    let report = BenchReport {
        config: (&config).into(),
        plan: plan.to_string(),
        head: a.head,
        chunks: a.chunks,
        warmup: a.warmup,
        chunk_ms,
        mean_ms: mean,
        p50_ms: percentile(&sorted, 50.0),
        p95_ms: percentile(&sorted, 95.0),
        p99_ms: percentile(&sorted, 99.0),
        max_ms: *sorted.last().unwrap(),
        rtf: mean / chunk_ms,
        flops_per_frame: transformer_flops + head_flops,
        head_flops_per_frame: head_flops,
        head_param_count: head_params,
        storage_bytes,
        pinned_core: pinned,
    };
    if a.json {
        emit_json(out, &report)?;
    } else {
        emit(
            out,
            format_args!(
                "head {:?}, plan {}\n{} chunks after {} warmup, {:.0} ms each\nlatency mean {:.3} ms  p50 {:.3}  p95 {:.3}  p99 {:.3}  max {:.3}\nreal-time factor {:.4}\nMACs per frame {} (head {})\nstorage {} bytes\n",
                report.head,
                report.plan,
                report.chunks,
                report.warmup,
                chunk_ms,
                report.mean_ms,
                report.p50_ms,
                report.p95_ms,
                report.p99_ms,
                report.max_ms,
                report.rtf,
                report.flops_per_frame,
                report.head_flops_per_frame,
                report.storage_bytes
            ),
        )?;
    }
    Ok(report)
}

/// Bytes of the two head linears and their bias under `plan`.
fn linear_head_bytes(config: &DecoderConfig, plan: &PrecisionPlan) -> u64 {
    let bits = plan.head_scheme.bits() as u64;
    tensor_specs(config)
        .iter()
        .filter(|s| s.owner == Owner::Head && s.name.starts_with("head."))
        .map(|s| (s.numel() as u64 * bits).div_ceil(8))
        .sum()
}

fn load_plans(spec: &str, config: &DecoderConfig) -> CliResult<Vec<PrecisionPlan>> {
    if spec == BUILTIN_LADDER {
        return Ok(PrecisionPlan::storage_ladder(config.num_layers));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let plans: Vec<_> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| parse_plan(l, config))
        .collect::<CliResult<_>>()?;
    if plans.is_empty() {
        return Err(CliError::Usage(format!("{spec}: no plans")));
    }
    Ok(plans)
}

pub fn cmd_quant_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<SweepReport> {
    let (weights, _) = load_model(&a.model)?;
    let config = weights.config.clone();
    let plans = load_plans(&a.plans, &config)?;
    let frames = match &a.frames {
        Some(path) => read_frames(path, &config)?,
        None => random_token_frames(&config, a.random, a.frame_seed),
    };
    let rows = sweep(&weights, &plans, &frames)?;
    let report = SweepReport {
        config: (&config).into(),
        frames: frames.len(),
        rows,
    };
    if a.json {
        emit_json(out, &report)?;
    } else {
        emit(
            out,
            format_args!(
                "{:<40} {:>10} {:>12} {:>10} {:>9}\n",
                "plan", "MB", "MB+scales", "SI-SDR", "mel-L1"
            ),
        )?;
        for r in &report.rows {
            emit(
                out,
                format_args!(
                    "{:<40} {:>10.1} {:>12.1} {:>10.2} {:>9.4}\n",
                    r.plan, r.storage_mb, r.storage_mb_with_scales, r.si_sdr_db, r.mel_l1
                ),
            )?;
        }
    }
    Ok(report)
}

/// Decodes `frames` under every plan and compares against the fp32 plan.
pub fn sweep(
    weights: &DecoderWeights,
    plans: &[PrecisionPlan],
    frames: &[FrameInput],
) -> CliResult<Vec<SweepRow>> {
    let config = &weights.config;
    let reference = Decoder::unquantized(weights)?.forward_offline(frames)?;
    let mel = MelConfig::new(config.sample_rate);
    plans
        .iter()
        .map(|plan| {
            let y = Decoder::new(weights, plan)?.forward_offline(frames)?;
            Ok(SweepRow {
                plan: plan.to_string(),
                storage_mb: plan.storage_mb(config, false)?,
                storage_mb_with_scales: plan.storage_mb(config, true)?,
                si_sdr_db: si_sdr(&reference, &y)?,
                mel_l1: multiscale_mel_l1(&reference, &y, &mel)?,
            })
        })
        .collect()
}

pub fn info_report(weights: &DecoderWeights, plan: &PrecisionPlan) -> CliResult<InfoReport> {
    let c = &weights.config;
    Ok(InfoReport {
        config: c.into(),
        plan: plan.to_string(),
        param_count: param_count(c),
        embedding_param_count: embedding_param_count(c),
        storage_bytes: plan.storage_bytes(c, false)?,
        storage_mb: plan.storage_mb(c, false)?,
        storage_bytes_with_scales: plan.storage_bytes(c, true)?,
        fp32_storage_mb: PrecisionPlan::fp32(c.num_layers).storage_mb(c, false)?,
        flops_per_frame: flops_per_frame(c),
        samples_per_frame: c.samples_per_frame,
        frame_ms: c.frame_ms(),
        kv_cache_bytes: (c.num_layers * 2 * c.attention_window * c.model_dim * 4) as u64,
    })
}

pub fn cmd_info(a: &InfoArgs, out: &mut dyn Write) -> CliResult<InfoReport> {
    let (weights, plan) = load_weights(&a.weights)?;
    let r = info_report(&weights, &plan)?;
    if a.json {
        emit_json(out, &r)?;
    } else {
        let c = &r.config;
        emit(
            out,
            format_args!(
                "layers {}  model dim {}  ffn {}  heads {}  window {}\nhead hidden {}  samples/frame {}  {} Hz  {:.0} ms frames\ncodebooks {} × {}\nplan {}\nparams {} ({:.1}M, embeddings excluded: {})\nstorage {:.1} MB ({} bytes; {} with scales), fp32 {:.1} MB\nMACs per frame {}\nKV cache {} bytes\n",
                c.num_layers,
                c.model_dim,
                c.ffn_dim,
                c.num_heads,
                c.attention_window,
                c.head_hidden_dim,
                c.samples_per_frame,
                c.sample_rate,
                r.frame_ms,
                c.num_codebooks,
                c.codebook_size,
                r.plan,
                r.param_count,
                r.param_count as f64 / 1e6,
                r.embedding_param_count,
                r.storage_mb,
                r.storage_bytes,
                r.storage_bytes_with_scales,
                r.fp32_storage_mb,
                r.flops_per_frame,
                r.kv_cache_bytes
            ),
        )?;
    }
    Ok(r)
}

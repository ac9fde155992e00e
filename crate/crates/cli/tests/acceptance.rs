//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs with the workspace test profile (opt-level 3); the latency check
//! depends on it.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use tmimi::frames::{decode_frames, encode_frames, random_token_frames, FrameInput};
use tmimi::metrics::{multiscale_mel_l1, si_sdr, MelConfig, SI_SDR_CAP_DB};
use tmimi::model::{
    deconv_flops_at, deconv_flops_per_frame, flops_per_frame_at, forward_offline,
    head_flops_per_frame, DeconvConfig, DeconvStream, DeconvWeights,
};
use tmimi::numerics::macs;
use tmimi::quant::{dequantize, fake_quant, quantize};
use tmimi::weight_file::{from_bytes, load, save, to_bytes};
use tmimi::{
    Decoder, DecoderConfig, DecoderWeights, Error, FormatError, PrecisionPlan, QuantScheme, Rng,
    StreamState, Tensor2D,
};
use tmimi_cli::commands::sweep;
use tmimi_cli::report::{BenchReport, InfoReport, SweepReport};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn tmimi(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tmimi"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "tmimi {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad JSON: {e}"))
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

fn random_config(rng: &mut Rng, window: usize) -> DecoderConfig {
    let heads = 1 + rng.below(2) as usize;
    let head_dim = 2 * (1 + rng.below(2) as usize);
    let layers = 1 + rng.below(3) as usize;
    let ffn = 8 + 4 * rng.below(3) as usize;
    let hidden = 4 + rng.below(5) as usize;
    let spf = 2 * (2 + rng.below(6) as usize);
    DecoderConfig::toy(layers, heads * head_dim, heads, ffn, window, hidden, spf)
}

fn c1_parameter_accounting(weights: &Path) -> Outcome {
    let info: InfoReport = parse(&tmimi(&[
        "info",
        "--weights",
        weights.to_str().unwrap(),
        "--json",
    ])?)?;
    let params = info.param_count as f64 / 1e6;
    ensure!(
        within(params, 40.8, 0.02),
        "params {params:.3}M outside 40.8M ± 2%"
    );
    ensure!(
        within(info.fp32_storage_mb, 163.2, 0.02) && within(info.storage_mb, 163.2, 0.02),
        "fp32 storage {:.2} MB outside 163.2 ± 2%",
        info.storage_mb
    );
    ensure!(
        info.config.num_layers == 12 && info.samples_per_frame == 1920,
        "unexpected config"
    );
    Ok(format!(
        "{params:.2}M params, {:.1} MB fp32",
        info.storage_mb
    ))
}

fn c2_storage_ladder(weights: &Path) -> Outcome {
    let text = tmimi(&[
        "quant-sweep",
        "--weights",
        weights.to_str().unwrap(),
        "--plans",
        "builtin-ladder",
        "--random",
        "2",
        "--json",
    ])?;
    let report: SweepReport = parse(&text)?;
    let target = [20.4, 40.8, 50.3, 59.2, 68.7, 78.2];
    ensure!(report.rows.len() == 6, "{} rows", report.rows.len());
    let got: Vec<f64> = report.rows.iter().map(|r| r.storage_mb).collect();
    for (g, t) in got.iter().zip(target) {
        ensure!(
            within(*g, t, 0.10),
            "storage {g:.1} MB vs {t} MB outside ± 10% ({got:?})"
        );
    }
    ensure!(
        got.windows(2).all(|w| w[0] < w[1]),
        "storage not increasing: {got:?}"
    );
    let shown: Vec<String> = got.iter().map(|g| format!("{g:.1}")).collect();
    Ok(format!("[{}] MB", shown.join(", ")))
}

fn c3_streaming_equivalence() -> Outcome {
    let mut rng = Rng::new(0xC3);
    let mut worst = 0.0f32;
    for case in 0..100 {
        let window = [4, 8, 250][case % 3];
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).map_err(|e| e.to_string())?;
        let n = 1 + rng.below(64) as usize;
        let frames = random_token_frames(&c, n, rng.next_u64());
        let dec = Arc::new(Decoder::new(&w, &PrecisionPlan::fp32(c.num_layers)).unwrap());
        let offline = dec.forward_offline(&frames).unwrap();
        let mut s = StreamState::new(Arc::clone(&dec));
        let streamed: Vec<f32> = frames.iter().flat_map(|f| s.step(f).unwrap()).collect();
        let d = max_abs_diff(&streamed, &offline);
        ensure!(d <= 1e-4, "case {case}: deviation {d:e}");
        let spf = c.samples_per_frame;
        ensure!(
            streamed[..spf] == offline[..spf],
            "case {case}: first chunk not bit-exact"
        );
        let single = forward_offline(&frames[..1], &w, &PrecisionPlan::fp32(c.num_layers)).unwrap();
        let mut fresh = StreamState::new(dec);
        ensure!(
            fresh.step(&frames[0]).unwrap() == single,
            "case {case}: 1-frame case not bit-exact"
        );
        worst = worst.max(d);
    }
    Ok(format!(
        "100 cases, max deviation {worst:.2e}, 1-frame bit-exact"
    ))
}

fn bump(frames: &mut [FrameInput], t: usize, c: &DecoderConfig) {
    if let FrameInput::Tokens(ids) = &mut frames[t] {
        ids[0] = (ids[0] + 1) % c.codebook_size as u16;
    }
}

fn c4_causality_and_window() -> Outcome {
    let mut rng = Rng::new(0xC4);
    for case in 0..50 {
        let window = 1 + rng.below(8) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let plan = PrecisionPlan::fp32(c.num_layers);
        let n = 2 + rng.below(30) as usize;
        let t0 = 1 + rng.below(n as u64 - 1) as usize;
        let mut frames = random_token_frames(&c, n, rng.next_u64());
        let before = forward_offline(&frames, &w, &plan).unwrap();
        bump(&mut frames, t0, &c);
        let after = forward_offline(&frames, &w, &plan).unwrap();
        let cut = t0 * c.samples_per_frame;
        ensure!(
            before[..cut] == after[..cut],
            "causality case {case}: past output changed"
        );
        ensure!(
            before[cut..] != after[cut..],
            "causality case {case}: perturbation had no effect"
        );
    }
    for case in 0..50 {
        let window = 1 + rng.below(5) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let plan = PrecisionPlan::fp32(c.num_layers);
        // Each layer extends the reach of a frame by W − 1 positions.
        let reach = c.num_layers * (window - 1);
        let t0 = rng.below(4) as usize;
        let n = t0 + reach + 2 + rng.below(6) as usize;
        let mut frames = random_token_frames(&c, n, rng.next_u64());
        let dec = Arc::new(Decoder::new(&w, &plan).unwrap());
        let run = |frames: &[FrameInput]| {
            let mut s = StreamState::new(Arc::clone(&dec));
            frames
                .iter()
                .flat_map(|f| s.step(f).unwrap())
                .collect::<Vec<f32>>()
        };
        let before = run(&frames);
        bump(&mut frames, t0, &c);
        let after = run(&frames);
        let free = (t0 + reach + 1) * c.samples_per_frame;
        ensure!(
            before[free..] == after[free..],
            "window case {case}: influence beyond {reach} frames"
        );
        if c.num_layers == 1 {
            let edge = (t0 + window - 1) * c.samples_per_frame..free;
            ensure!(
                before[edge.clone()] != after[edge],
                "window case {case}: edge frame unaffected"
            );
        }
    }
    Ok("50 causality + 50 window-locality cases".into())
}

fn c5_quantization() -> Outcome {
    let mut rng = Rng::new(0xC5);
    let schemes = |rng: &mut Rng, cols: usize| {
        [
            QuantScheme::Int8PerChannel,
            QuantScheme::Int4GroupWise { group_size: cols },
            QuantScheme::Int4GroupWise {
                group_size: 1 + rng.below(cols as u64) as usize,
            },
            QuantScheme::INT4_DEFAULT,
        ]
    };
    let mut checked = 0u64;
    for i in 0..1000 {
        let rows = 1 + rng.below(16) as usize;
        let cols = 1 + rng.below(80) as usize;
        let bound = [1e-3, 1.0, 50.0][i % 3];
        let mut w = Tensor2D::random_uniform(rows, cols, bound, &mut rng);
        if i % 10 == 0 {
            w.row_mut(0).fill(0.0);
        }
        for scheme in schemes(&mut rng, cols) {
            let q = quantize(&w, scheme).unwrap().unwrap();
            let d = dequantize(&q);
            for r in 0..rows {
                for c in 0..cols {
                    let s = q.scale_at(r, c) as f64;
                    let code = q.values()[r * cols + c] as f64;
                    let err = (w.get(r, c) as f64 - code * s).abs();
                    ensure!(
                        err <= s / 2.0,
                        "{scheme} matrix {i} ({r},{c}): error {err:e} > scale/2 {s:e}"
                    );
                    ensure!(
                        d.get(r, c) == (code * s) as f32,
                        "{scheme}: dequantized value mismatch"
                    );
                }
            }
            let once = fake_quant(&w, scheme).unwrap();
            ensure!(
                fake_quant(&once, scheme).unwrap() == once,
                "{scheme} matrix {i}: fake-quant not idempotent"
            );
            checked += 1;
        }
    }
    for case in 0..10 {
        let window = 1 + rng.below(6) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let frames = random_token_frames(&c, 1 + rng.below(20) as usize, rng.next_u64());
        let plan: PrecisionPlan = format!("T1-{}:fp32,L:fp32", c.num_layers).parse().unwrap();
        let fp32 = forward_offline(&frames, &w, &plan).unwrap();
        let unq = Decoder::unquantized(&w)
            .unwrap()
            .forward_offline(&frames)
            .unwrap();
        ensure!(
            fp32 == unq,
            "case {case}: fp32 plan differs from unquantized forward"
        );
        ensure!(
            w.quantized(&plan).unwrap() == w,
            "case {case}: fp32 plan altered weights"
        );
    }
    Ok(format!(
        "{checked} matrix/scheme pairs within scale/2, idempotent; fp32 plan bit-exact"
    ))
}

fn c6_sensitivity_trend() -> Outcome {
    let config = DecoderConfig::default();
    let frames = random_token_frames(&config, 8, 1);
    let plans = PrecisionPlan::storage_ladder(config.num_layers);
    let seeds = 10;
    let mut sums = vec![0.0; plans.len()];
    for seed in 0..seeds {
        let w = DecoderWeights::init_random(&config, seed).unwrap();
        let rows = sweep(&w, &plans, &frames).map_err(|e| e.to_string())?;
        for (s, r) in sums.iter_mut().zip(&rows) {
            *s += r.si_sdr_db;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / seeds as f64).collect();
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.2}")).collect();
    ensure!(
        means.windows(2).all(|w| w[0] <= w[1]),
        "mean SI-SDR not non-decreasing: [{}] dB",
        shown.join(", ")
    );
    ensure!(
        means[1..].iter().all(|&m| m > means[0]),
        "all-int4 not strictly lowest: [{}] dB",
        shown.join(", ")
    );
    Ok(format!(
        "mean SI-SDR over {seeds} seeds [{}] dB",
        shown.join(", ")
    ))
}

fn c7_flop_comparison() -> Outcome {
    let config = DecoderConfig::default();
    let dc = DeconvConfig::reference(config.model_dim, 3);
    let h = config.head_hidden_dim as u64;
    let head_params = config.model_dim as u64 * h + h + h * config.samples_per_frame as u64;
    let matched = dc.param_count() as f64 / head_params as f64;
    ensure!(
        (0.95..=1.05).contains(&matched),
        "deconv/head params ratio {matched:.3}"
    );
    let ratio = deconv_flops_per_frame(&dc) as f64 / head_flops_per_frame(&config) as f64;
    ensure!(ratio > 1.0, "deconv/head MAC ratio {ratio:.2} ≤ 1");

    let mut rng = Rng::new(0xC7);
    for case in 0..10 {
        let window = 1 + rng.below(6) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let mut s = StreamState::new(Arc::new(
            Decoder::new(&w, &PrecisionPlan::fp32(c.num_layers)).unwrap(),
        ));
        for (t, f) in random_token_frames(&c, window + 4, 3).iter().enumerate() {
            macs::reset();
            s.step(f).unwrap();
            let want = flops_per_frame_at(&c, t + 1);
            ensure!(
                macs::get() == want,
                "case {case} step {t}: counted {} vs analytic {want}",
                macs::get()
            );
        }
    }
    let small = DeconvConfig {
        in_channels: 5,
        channels: vec![4, 3, 1],
        strides: vec![3, 2, 4],
        kernels: vec![6, 3, 8],
        context_frames: 3,
    };
    let mut ds = DeconvStream::new(DeconvWeights::init_random(&small, 1).unwrap());
    for t in 0..6 {
        let x: Vec<f32> = (0..5).map(|_| rng.uniform_symmetric(1.0)).collect();
        macs::reset();
        ds.step(&x).unwrap();
        let want = deconv_flops_at(&small, (t + 1).min(3));
        ensure!(
            macs::get() == want,
            "deconv step {t}: counted {} vs analytic {want}",
            macs::get()
        );
    }
    Ok(format!(
        "deconv/head MACs {ratio:.1}x at {matched:.3} param ratio; instrumented counts exact"
    ))
}

fn c8_latency(weights: &Path) -> Outcome {
    let text = tmimi(&[
        "stream-bench",
        "--weights",
        weights.to_str().unwrap(),
        "--chunks",
        "500",
        "--warmup",
        "20",
        "--json",
    ])?;
    let r: BenchReport = parse(&text)?;
    ensure!(r.chunks >= 500, "{} chunks", r.chunks);
    ensure!(
        r.p50_ms <= r.p95_ms && r.p95_ms <= r.p99_ms,
        "percentiles out of order"
    );
    ensure!(r.rtf > 0.0 && r.rtf < 1.0, "real-time factor {:.3}", r.rtf);
    Ok(format!(
        "RTF {:.3}, mean {:.2} ms, p50 {:.2} / p95 {:.2} / p99 {:.2} ms over {} chunks",
        r.rtf, r.mean_ms, r.p50_ms, r.p95_ms, r.p99_ms, r.chunks
    ))
}

fn format_kind(bytes: &[u8]) -> Result<FormatError, String> {
    match from_bytes(bytes) {
        Err(Error::Format(e)) => Ok(e),
        Err(other) => Err(format!("non-format error {other}")),
        Ok(_) => Err("corrupted file accepted".into()),
    }
}

fn c9_format_round_trips(dir: &Path) -> Outcome {
    let mut rng = Rng::new(0xC9);
    let schemes = [
        QuantScheme::Fp32,
        QuantScheme::Int8PerChannel,
        QuantScheme::Int4GroupWise { group_size: 3 },
    ];
    for case in 0..50 {
        let window = 1 + rng.below(8) as usize;
        let c = random_config(&mut rng, window);
        let w = DecoderWeights::init_random(&c, rng.next_u64()).unwrap();
        let mut plan = PrecisionPlan::fp32(c.num_layers);
        for s in plan.layer_schemes.iter_mut() {
            *s = schemes[rng.below(3) as usize];
        }
        plan.head_scheme = schemes[rng.below(3) as usize];
        let path = dir.join(format!("rt{case}.tmim"));
        save(&w, &plan, &path).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).unwrap();
        let (w2, p2, c2) = load(&path).map_err(|e| e.to_string())?;
        ensure!(c2 == c && p2 == plan, "case {case}: header mismatch");
        ensure!(
            w2 == w.quantized(&plan).unwrap(),
            "case {case}: tensors differ"
        );
        ensure!(
            to_bytes(&w2, &p2).unwrap() == bytes,
            "case {case}: re-save not byte-identical"
        );

        let frames: Vec<FrameInput> = if case % 2 == 0 {
            random_token_frames(&c, rng.below(16) as usize, rng.next_u64())
        } else {
            (0..rng.below(16))
                .map(|_| FrameInput::random_latent(&c, &mut rng))
                .collect()
        };
        let fb = encode_frames(&frames).unwrap();
        ensure!(
            decode_frames(&fb, &c).unwrap() == frames,
            "case {case}: frames differ"
        );
    }

    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/toy.tmim");
    let good = std::fs::read(&fixture).map_err(|e| format!("{}: {e}", fixture.display()))?;
    ensure!(from_bytes(&good).is_ok(), "golden fixture rejected");
    let mut flip = good.clone();
    flip[good.len() / 3] ^= 0x10;
    ensure!(
        matches!(format_kind(&flip)?, FormatError::Checksum { .. }),
        "byte flip not a checksum error"
    );
    let mut ver = good.clone();
    ver[4..8].copy_from_slice(&2u32.to_le_bytes());
    ensure!(
        format_kind(&ver)? == FormatError::UnsupportedVersion(2),
        "version bump not rejected as unsupported"
    );
    let mut magic = good.clone();
    magic[0] = b'X';
    ensure!(
        matches!(format_kind(&magic)?, FormatError::BadMagic { .. }),
        "bad magic not detected"
    );
    ensure!(
        matches!(format_kind(&good[..30])?, FormatError::Truncated { .. }),
        "short file not truncated"
    );
    let cut = format_kind(&good[..good.len() - 7])?;
    ensure!(
        matches!(
            cut,
            FormatError::Checksum { .. } | FormatError::Truncated { .. }
        ),
        "truncation gave {cut:?}"
    );
    Ok(
        "50 weight + 50 frames round-trips bit-identical; corrupted fixtures rejected by kind"
            .into(),
    )
}

/// HTK triangular filterbank and naive DFT, written independently of the
/// library.
fn reference_log_mel(x: &[f32], n_fft: usize, n_mels: usize, sr: f64) -> Vec<f64> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr / 2.0);
    let pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bins = n_fft / 2 + 1;
    let tri = |m: usize, f: f64| {
        let (l, c, r) = (pts[m], pts[m + 1], pts[m + 2]);
        if f <= l || f >= r {
            0.0
        } else if f <= c {
            (f - l) / (c - l)
        } else {
            (r - f) / (r - c)
        }
    };
    let cos: Vec<f64> = (0..n_fft)
        .map(|i| (2.0 * PI * i as f64 / n_fft as f64).cos())
        .collect();
    let sin: Vec<f64> = (0..n_fft)
        .map(|i| (2.0 * PI * i as f64 / n_fft as f64).sin())
        .collect();
    let half = n_fft / 2;
    let n = x.len();
    let mut padded = Vec::with_capacity(n + n_fft);
    for i in (1..=half).rev() {
        padded.push(x[i] as f64);
    }
    padded.extend(x.iter().map(|&v| v as f64));
    for i in 0..half {
        padded.push(x[n - 2 - i] as f64);
    }
    let hop = n_fft / 4;
    let mut out = vec![];
    for t in 0..=n / hop {
        let frame: Vec<f64> = (0..n_fft)
            .map(|i| padded[t * hop + i] * (0.5 - 0.5 * cos[i]))
            .collect();
        let mags: Vec<f64> = (0..bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in frame.iter().enumerate() {
                    let p = (k * i) % n_fft;
                    re += v * cos[p];
                    im -= v * sin[p];
                }
                re.hypot(im)
            })
            .collect();
        for m in 0..n_mels {
            let e: f64 = (0..bins)
                .map(|k| tri(m, k as f64 * sr / n_fft as f64) * mags[k])
                .sum();
            out.push(e.max(1e-5).ln());
        }
    }
    out
}

fn reference_mel_l1(a: &[f32], b: &[f32], cfg: &MelConfig) -> f64 {
    let mut total = 0.0;
    for (&n_fft, &n_mels) in cfg.fft_sizes.iter().zip(&cfg.n_mels) {
        let ma = reference_log_mel(a, n_fft, n_mels, cfg.sample_rate as f64);
        let mb = reference_log_mel(b, n_fft, n_mels, cfg.sample_rate as f64);
        total += ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum::<f64>() / ma.len() as f64;
    }
    total / cfg.fft_sizes.len() as f64
}

fn c10_metrics_oracle() -> Outcome {
    let ident = si_sdr(&[0.1, -0.4, 0.7], &[0.1, -0.4, 0.7]).unwrap();
    ensure!(
        (ident - SI_SDR_CAP_DB).abs() <= 1e-6,
        "identity gave {ident}"
    );
    let zero = si_sdr(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
    ensure!(zero.abs() <= 1e-6, "[1,0] vs [1,1] gave {zero}");
    let cfg = MelConfig::default();
    let mut rng = Rng::new(0xC10);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let len = 2048 + rng.below(1024) as usize;
        let a: Vec<f32> = (0..len).map(|_| rng.uniform_symmetric(0.5)).collect();
        let b: Vec<f32> = if case == 0 {
            vec![0.0; len]
        } else {
            a.iter()
                .map(|v| v * 0.7 + rng.uniform_symmetric(0.05))
                .collect()
        };
        let got = multiscale_mel_l1(&a, &b, &cfg).unwrap();
        let want = reference_mel_l1(&a, &b, &cfg);
        let d = (got - want).abs();
        ensure!(d <= 1e-6, "signal {case}: {got} vs reference {want}");
        worst = worst.max(d);
    }
    Ok(format!(
        "SI-SDR hand cases exact; mel-L1 within {worst:.1e} of reference on 20 signals"
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let weights = dir.path().join("default.tmim");
    let setup = tmimi(&[
        "init-weights",
        "--seed",
        "0",
        "--out",
        weights.to_str().unwrap(),
    ]);

    let criteria: Vec<Criterion> = vec![
        (
            "parameter accounting",
            Box::new(|| c1_parameter_accounting(&weights)),
        ),
        ("storage ladder", Box::new(|| c2_storage_ladder(&weights))),
        (
            "streaming/offline equivalence",
            Box::new(c3_streaming_equivalence),
        ),
        ("causality and window", Box::new(c4_causality_and_window)),
        ("quantization bounds", Box::new(c5_quantization)),
        ("sensitivity trend", Box::new(c6_sensitivity_trend)),
        ("FLOP comparison", Box::new(c7_flop_comparison)),
        ("latency harness", Box::new(|| c8_latency(&weights))),
        (
            "format round-trips",
            Box::new(|| c9_format_round_trips(dir.path())),
        ),
        ("metrics oracle", Box::new(c10_metrics_oracle)),
    ];
    let needs_file = [1, 2, 8];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        let outcome = match (&setup, needs_file.contains(&n)) {
            (Err(e), true) => Err(format!("setup failed: {e}")),
            _ => catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
                Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()))
            }),
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

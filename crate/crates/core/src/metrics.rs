//! Objective signal metrics: SI-SDR, multi-scale log-mel L1 distance and the
//! RMS level inside regions that should be silent.
//!
//! All accumulation happens in f64.
//!
//! Mel spectrogram details, fixed so results are reproducible:
//! - frames are centered: the signal is reflect-padded by `n_fft / 2` on both
//!   sides (`x[-i] = x[i]`), giving `1 + len / hop` frames;
//! - periodic Hann window `0.5 − 0.5·cos(2πn / n_fft)`;
//! - magnitude spectrum over bins `0..=n_fft/2`;
//! - HTK mel scale `2595·log10(1 + f/700)`, triangular filters between 0 Hz
//!   and Nyquist, unnormalized;
//! - natural log of `max(mel, floor)`.

use std::ops::Range;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Upper clamp of [`si_sdr`], returned when the residual vanishes.
pub const SI_SDR_CAP_DB: f64 = 100.0;
/// Lower clamp of [`si_sdr`], reached when the estimate has no component
/// along the reference.
pub const SI_SDR_FLOOR_DB: f64 = -100.0;

/// Scale-invariant signal-to-distortion ratio of `estimate` against
/// `reference`, in dB, clamped to `[-100, 100]`.
pub fn si_sdr(reference: &[f32], estimate: &[f32]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::Shape(format!(
            "si_sdr: reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Empty("si_sdr input"));
    }
    if !reference.iter().chain(estimate).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("si_sdr input"));
    }
    let rr: f64 = reference.iter().map(|&r| (r as f64) * (r as f64)).sum();
    if rr == 0.0 {
        return Err(Error::Invalid("si_sdr: reference is all zeros".into()));
    }
    let er: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(&r, &e)| r as f64 * e as f64)
        .sum();
    let alpha = er / rr;
    let (mut target, mut residual) = (0.0f64, 0.0f64);
    for (&r, &e) in reference.iter().zip(estimate) {
        let t = alpha * r as f64;
        target += t * t;
        residual += (e as f64 - t) * (e as f64 - t);
    }
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    if target == 0.0 {
        return Ok(SI_SDR_FLOOR_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(SI_SDR_FLOOR_DB, SI_SDR_CAP_DB))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MelConfig {
    pub fft_sizes: Vec<usize>,
    pub n_mels: Vec<usize>,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl MelConfig {
    pub const DEFAULT_FFT_SIZES: [usize; 6] = [2048, 1024, 512, 256, 128, 64];
    pub const DEFAULT_N_MELS: [usize; 6] = [80, 80, 64, 32, 16, 8];
    pub const DEFAULT_LOG_FLOOR: f64 = 1e-5;

    pub fn new(sample_rate: u32) -> Self {
        Self {
            fft_sizes: Self::DEFAULT_FFT_SIZES.to_vec(),
            n_mels: Self::DEFAULT_N_MELS.to_vec(),
            sample_rate,
            log_floor: Self::DEFAULT_LOG_FLOOR,
        }
    }

    pub fn hop(n_fft: usize) -> usize {
        n_fft / 4
    }

    pub fn max_fft(&self) -> usize {
        self.fft_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_sizes.is_empty() || self.fft_sizes.len() != self.n_mels.len() {
            return Err(Error::Config(format!(
                "mel config: {} fft sizes, {} mel counts",
                self.fft_sizes.len(),
                self.n_mels.len()
            )));
        }
        if let Some(n) = self
            .fft_sizes
            .iter()
            .find(|n| !n.is_power_of_two() || **n < 4)
        {
            return Err(Error::Config(format!(
                "fft size {n} is not a power of two ≥ 4"
            )));
        }
        if self.n_mels.contains(&0) || self.sample_rate == 0 {
            return Err(Error::Config(
                "mel count and sample rate must be positive".into(),
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(Error::Config("log floor must be positive".into()));
        }
        Ok(())
    }
}

impl Default for MelConfig {
    fn default() -> Self {
        Self::new(24_000)
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK filterbank, `n_mels` rows of `n_fft/2 + 1` weights.
/// Errors if any filter misses every FFT bin.
pub fn mel_filterbank(n_fft: usize, n_mels: usize, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;
    let mut bank = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = bin_hz(k);
                let up = (f - lo) / (mid - lo);
                let down = (hi - f) / (hi - mid);
                up.min(down).max(0.0)
            })
            .collect();
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!(
                "mel filter {m} of {n_mels} covers no bin at n_fft {n_fft}"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

struct Scale {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    bank: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl Scale {
    fn new(
        n_fft: usize,
        n_mels: usize,
        sample_rate: u32,
        planner: &mut FftPlanner<f64>,
    ) -> Result<Self> {
        let window = (0..n_fft)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / n_fft as f64).cos())
            .collect();
        Ok(Self {
            n_fft,
            hop: MelConfig::hop(n_fft),
            window,
            bank: mel_filterbank(n_fft, n_mels, sample_rate)?,
            fft: planner.plan_fft_forward(n_fft),
        })
    }

    /// Log-mel frames, flattened frame-major.
    fn log_mel(&self, x: &[f32], floor: f64) -> Vec<f64> {
        let pad = self.n_fft / 2;
        let len = x.len() as isize;
        let at = |i: isize| -> f64 {
            let j = if i < 0 {
                -i
            } else if i >= len {
                2 * (len - 1) - i
            } else {
                i
            };
            x[j as usize] as f64
        };
        let frames = 1 + x.len() / self.hop;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        let mut mag = vec![0.0; self.n_fft / 2 + 1];
        let mut out = Vec::with_capacity(frames * self.bank.len());
        for t in 0..frames {
            let start = (t * self.hop) as isize - pad as isize;
            for (n, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(at(start + n as isize) * self.window[n], 0.0);
            }
            self.fft.process(&mut buf);
            for (m, b) in mag.iter_mut().zip(&buf) {
                *m = b.norm();
            }
            for filt in &self.bank {
                let e: f64 = filt.iter().zip(&mag).map(|(w, m)| w * m).sum();
                out.push(e.max(floor).ln());
            }
        }
        out
    }
}

/// Mean over scales of the mean absolute log-mel difference.
pub fn multiscale_mel_l1(a: &[f32], b: &[f32], cfg: &MelConfig) -> Result<f64> {
    cfg.validate()?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "mel distance: {} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.len() < cfg.max_fft() {
        return Err(Error::Invalid(format!(
            "mel distance needs at least {} samples, got {}",
            cfg.max_fft(),
            a.len()
        )));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("mel distance input"));
    }
    let mut planner = FftPlanner::new();
    let mut total = 0.0;
    for (&n_fft, &n_mels) in cfg.fft_sizes.iter().zip(&cfg.n_mels) {
        let scale = Scale::new(n_fft, n_mels, cfg.sample_rate, &mut planner)?;
        let ma = scale.log_mel(a, cfg.log_floor);
        let mb = scale.log_mel(b, cfg.log_floor);
        let sum: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum();
        total += sum / ma.len() as f64;
    }
    Ok(total / cfg.fft_sizes.len() as f64)
}

/// RMS over the union of `regions` (overlaps counted once).
pub fn silence_noise_rms(waveform: &[f32], regions: &[Range<usize>]) -> Result<f64> {
    if regions.is_empty() {
        return Err(Error::Empty("silent region list"));
    }
    if let Some(r) = regions
        .iter()
        .find(|r| r.start > r.end || r.end > waveform.len())
    {
        return Err(Error::Invalid(format!(
            "region {}..{} outside waveform of {} samples",
            r.start,
            r.end,
            waveform.len()
        )));
    }
    let mut covered = vec![false; waveform.len()];
    for r in regions {
        covered[r.clone()].fill(true);
    }
    let (sum, n) = waveform
        .iter()
        .zip(&covered)
        .filter(|(_, &c)| c)
        .fold((0.0f64, 0usize), |(s, n), (&v, _)| {
            (s + v as f64 * v as f64, n + 1)
        });
    if n == 0 {
        return Err(Error::Empty("silent regions"));
    }
    Ok((sum / n as f64).sqrt())
}

//! 16-bit PCM mono WAV output.

use std::io::{Seek, Write};

use hound::{SampleFormat, WavSpec, WavWriter};

/// Float sample to PCM16: clamp to [-1, 1], scale by 32767, round to
/// nearest (half away from zero). NaN maps to 0.
pub fn to_pcm16(x: f32) -> i16 {
    if x.is_nan() {
        return 0;
    }
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn write_wav<W: Write + Seek>(out: W, samples: &[f32], sample_rate: u32) -> hound::Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::new(out, spec)?;
    let mut pcm = w.get_i16_writer(samples.len() as u32);
    for &s in samples {
        pcm.write_sample(to_pcm16(s));
    }
    pcm.flush()?;
    w.finalize()
}

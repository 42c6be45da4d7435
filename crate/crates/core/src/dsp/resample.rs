use std::sync::OnceLock;

use super::filter::{bessel_i0, sinc};
use super::AudioSegment;
use crate::error::{invalid, Result};

/// Kernel half-width, in samples of the lower of the two rates.
const HALF_WIDTH: usize = 64;
/// Table points per lower-rate sample.
const OVERSAMPLE: usize = 512;
/// Passband fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.92;
const BETA: f64 = 9.0;

/// Kaiser-windowed sinc sampled on `[0, HALF_WIDTH]` in lower-rate units.
fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = HALF_WIDTH * OVERSAMPLE + 2;
        let norm = bessel_i0(BETA);
        (0..n)
            .map(|i| {
                let v = i as f64 / OVERSAMPLE as f64;
                let r = (v / HALF_WIDTH as f64).min(1.0);
                let w = bessel_i0(BETA * (1.0 - r * r).sqrt()) / norm;
                ROLLOFF * sinc(ROLLOFF * v) * w
            })
            .collect()
    })
}

fn kernel_at(table: &[f64], v: f64) -> f64 {
    let pos = v.abs() * OVERSAMPLE as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] * (1.0 - frac) + table[i + 1] * frac
}

/// Band-limited resampling of a raw buffer by windowed-sinc interpolation.
/// Output length is `round(len * to / from)`.
pub fn resample_slice(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to {
        return x.to_vec();
    }
    let out_len = ((x.len() as u64 * to as u64) as f64 / from as f64).round() as usize;
    if x.is_empty() {
        return vec![0.0; out_len];
    }
    let table = kernel_table();
    let step = from as f64 / to as f64;
    // kernel argument in lower-rate samples per input sample
    let scale = (to as f64 / from as f64).min(1.0);
    let reach = HALF_WIDTH as f64 / scale;
    let last = x.len() as isize - 1;
    (0..out_len)
        .map(|m| {
            let t = m as f64 * step;
            let lo = ((t - reach).ceil() as isize).max(0);
            let hi = ((t + reach).floor() as isize).min(last);
            let mut acc = 0.0;
            for n in lo..=hi {
                acc += x[n as usize] * kernel_at(table, (t - n as f64) * scale);
            }
            acc * scale
        })
        .collect()
}

pub fn resample(audio: &AudioSegment, target_rate: u32) -> Result<AudioSegment> {
    if target_rate == 0 {
        return Err(invalid("target_rate must be positive"));
    }
    AudioSegment::new(
        resample_slice(audio.samples(), audio.sample_rate(), target_rate),
        target_rate,
    )
}

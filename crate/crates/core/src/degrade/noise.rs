use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, next_pow2};

/// Synthetic noise families used when no recorded noise bank is configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseColor {
    White,
    Pink,
    Brown,
    Hum,
}

impl NoiseColor {
    pub const ALL: [NoiseColor; 4] = [NoiseColor::White, NoiseColor::Pink, NoiseColor::Brown, NoiseColor::Hum];

    pub fn label(&self) -> &'static str {
        match self {
            NoiseColor::White => "white",
            NoiseColor::Pink => "pink",
            NoiseColor::Brown => "brown",
            NoiseColor::Hum => "hum",
        }
    }
}

/// Unit-RMS noise of the requested color.
pub fn synth_noise<R: Rng + ?Sized>(color: NoiseColor, len: usize, sample_rate: u32, rng: &mut R) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let white: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = match color {
        NoiseColor::White => white,
        // power ~ 1/f and 1/f^2, shaped in the frequency domain
        NoiseColor::Pink => spectral_tilt(&white, 0.5, sample_rate),
        NoiseColor::Brown => spectral_tilt(&white, 1.0, sample_rate),
        NoiseColor::Hum => {
            let mains = if rng.gen_bool(0.5) { 50.0 } else { 60.0 };
            let harmonics: Vec<(f64, f64)> = (1..=8)
                .map(|k| (rng.gen_range(0.2..1.0) / k as f64, rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let floor = 0.05;
            (0..len)
                .map(|i| {
                    let t = i as f64 / sample_rate as f64;
                    let tone: f64 = harmonics
                        .iter()
                        .enumerate()
                        .map(|(k, (a, ph))| a * (std::f64::consts::TAU * mains * (k + 1) as f64 * t + ph).sin())
                        .sum();
                    tone + floor * white[i]
                })
                .collect()
        }
    };
    let r = dsp::rms(&out);
    if r > 0.0 {
        out.iter_mut().for_each(|v| *v /= r);
    }
    out
}

/// Scales each frequency component by `1 / f^exponent` (amplitude), with
/// a 20 Hz floor so DC does not dominate.
fn spectral_tilt(x: &[f64], exponent: f64, sample_rate: u32) -> Vec<f64> {
    let n = next_pow2(x.len());
    let fwd = dsp::forward_plan(n);
    let inv = dsp::inverse_plan(n);
    let mut buf = fwd.make_input_vec();
    buf[..x.len()].copy_from_slice(x);
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).expect("fft buffer sizes match plan");
    let df = sample_rate as f64 / n as f64;
    for (k, c) in spec.iter_mut().enumerate() {
        let f = (k as f64 * df).max(20.0);
        *c *= f.powf(-exponent);
    }
    let last = spec.len() - 1;
    spec[0].im = 0.0;
    spec[last].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("fft buffer sizes match plan");
    out.truncate(x.len());
    out
}

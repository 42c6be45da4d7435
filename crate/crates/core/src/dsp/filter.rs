use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::convolve::{convolve_slices, ConvMode};
use crate::error::{invalid, Result};

/// Lowpass design families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FilterKind {
    SincHann,
    SincKaiser { beta: f64 },
    Butterworth { order: usize },
    Chebyshev1 { order: usize, ripple_db: f64 },
}

impl Default for FilterKind {
    fn default() -> Self {
        FilterKind::SincKaiser { beta: DEFAULT_KAISER_BETA }
    }
}

impl FilterKind {
    pub fn label(&self) -> String {
        match self {
            FilterKind::SincHann => "sinc_hann".into(),
            FilterKind::SincKaiser { beta } => format!("sinc_kaiser_b{beta}"),
            FilterKind::Butterworth { order } => format!("butterworth_o{order}"),
            FilterKind::Chebyshev1 { order, ripple_db } => format!("chebyshev1_o{order}_r{ripple_db}"),
        }
    }
}

/// Kaiser beta for roughly 80 dB stopband rejection.
pub const DEFAULT_KAISER_BETA: f64 = 8.0;
const STOPBAND_RATIO: f64 = 1.15;
const MAX_TAPS: usize = 16_385;

/// Symmetric FIR filter applied with its group delay removed.
///
/// IIR designs are stored as the autocorrelation of their impulse response,
/// which is exactly the response of forward-backward (zero-phase) filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub nominal_cutoff: f64,
    pub sample_rate: u32,
}

impl FirFilter {
    pub fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Zero-phase filtering; output has the input's length and alignment.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let c = self.center();
        let full = convolve_slices(x, &self.taps, ConvMode::Full);
        full[c..c + x.len()].to_vec()
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Magnitude response at `freq` Hz.
    pub fn gain_at(&self, freq: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / self.sample_rate as f64;
        let h: Complex64 = self
            .taps
            .iter()
            .enumerate()
            .map(|(n, &t)| Complex64::from_polar(t, -w * n as f64))
            .sum();
        h.norm()
    }
}

/// Zeroth-order modified Bessel function of the first kind.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn design_lowpass(cutoff: f64, sample_rate: u32, kind: FilterKind) -> Result<FirFilter> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(invalid(format!("cutoff {cutoff} Hz outside (0, {nyquist}) Hz")));
    }
    let taps = match kind {
        FilterKind::SincHann => windowed_sinc(cutoff, sample_rate, Window::Hann)?,
        FilterKind::SincKaiser { beta } => {
            if !(beta >= 0.0) {
                return Err(invalid("kaiser beta must be non-negative"));
            }
            windowed_sinc(cutoff, sample_rate, Window::Kaiser(beta))?
        }
        FilterKind::Butterworth { order } => {
            if order == 0 || order > 16 {
                return Err(invalid("butterworth order must be in 1..=16"));
            }
            zero_phase_taps(&butterworth_sections(cutoff, sample_rate, order))
        }
        FilterKind::Chebyshev1 { order, ripple_db } => {
            if order == 0 || order > 16 {
                return Err(invalid("chebyshev order must be in 1..=16"));
            }
            if !(ripple_db > 0.0 && ripple_db < 10.0) {
                return Err(invalid("chebyshev ripple must be in (0, 10) dB"));
            }
            zero_phase_taps(&chebyshev1_sections(cutoff, sample_rate, order, ripple_db))
        }
    };
    Ok(FirFilter {
        taps,
        nominal_cutoff: cutoff,
        sample_rate,
    })
}

enum Window {
    Hann,
    Kaiser(f64),
}

/// Passband edge at `cutoff`, stopband edge at `1.15 * cutoff` (clamped to
/// Nyquist); the sinc is centered in that transition band.
fn windowed_sinc(cutoff: f64, sample_rate: u32, window: Window) -> Result<Vec<f64>> {
    let fs = sample_rate as f64;
    let nyquist = fs / 2.0;
    let stop = (cutoff * STOPBAND_RATIO).min(nyquist);
    let transition = (stop - cutoff).max(1e-9) / fs;
    let fc = (cutoff + stop) / 2.0 / fs;
    // Kaiser length estimate for ~80 dB; the Hann window needs a similar length
    let est = (72.0 / (2.285 * 2.0 * std::f64::consts::PI * transition)).ceil() as usize + 1;
    let mut len = est.clamp(3, MAX_TAPS);
    if len % 2 == 0 {
        len += 1;
    }
    let m = (len - 1) as f64;
    let c = m / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - c;
            let w = match window {
                Window::Hann => 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / m).cos(),
                Window::Kaiser(beta) => {
                    let r = t / c;
                    bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta)
                }
            };
            2.0 * fc * sinc(2.0 * fc * t) * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Second-order section `b0 + b1 z^-1 + b2 z^-2 / 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 3],
}

impl Biquad {
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[1] * y1 - self.a[2] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// Bilinear transform of analog poles (already scaled by the prewarped
/// cutoff), each section normalized to unit DC gain, zeros at z = -1.
fn sections_from_poles(poles: &[Complex64], fs: f64, dc_gain: f64) -> Vec<Biquad> {
    let k = 2.0 * fs;
    let mut sections = Vec::new();
    for p in poles {
        let tol = 1e-9 * p.norm();
        if p.im < -tol {
            continue;
        }
        let z = (k + p) / (k - p);
        if p.im.abs() <= tol {
            let a1 = -z.re;
            let g = (1.0 + a1) / 2.0;
            sections.push(Biquad {
                b: [g, g, 0.0],
                a: [1.0, a1, 0.0],
            });
        } else {
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push(Biquad {
                b: [g, 2.0 * g, g],
                a: [1.0, a1, a2],
            });
        }
    }
    if let Some(first) = sections.first_mut() {
        first.b.iter_mut().for_each(|b| *b *= dc_gain);
    }
    sections
}

fn prewarp(cutoff: f64, fs: f64) -> f64 {
    2.0 * fs * (std::f64::consts::PI * cutoff / fs).tan()
}

fn butterworth_sections(cutoff: f64, sample_rate: u32, order: usize) -> Vec<Biquad> {
    let fs = sample_rate as f64;
    let wc = prewarp(cutoff, fs);
    let n = order as f64;
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(wc, theta)
        })
        .collect();
    sections_from_poles(&poles, fs, 1.0)
}

fn chebyshev1_sections(cutoff: f64, sample_rate: u32, order: usize, ripple_db: f64) -> Vec<Biquad> {
    let fs = sample_rate as f64;
    let wc = prewarp(cutoff, fs);
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let n = order as f64;
    let v0 = (1.0 / eps).asinh() / n;
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n);
            Complex64::new(-v0.sinh() * theta.sin(), v0.cosh() * theta.cos()) * wc
        })
        .collect();
    let dc = if order % 2 == 0 {
        1.0 / (1.0 + eps * eps).sqrt()
    } else {
        1.0
    };
    sections_from_poles(&poles, fs, dc)
}

/// Symmetric taps equal to forward-backward filtering with the cascade.
fn zero_phase_taps(sections: &[Biquad]) -> Vec<f64> {
    let mut len = 1024;
    let h = loop {
        let mut h = vec![0.0; len];
        h[0] = 1.0;
        for s in sections {
            h = s.run(&h);
        }
        let total: f64 = h.iter().map(|v| v * v).sum();
        let tail: f64 = h[len - len / 8..].iter().map(|v| v * v).sum();
        if tail <= 1e-16 * total || len >= MAX_TAPS / 2 {
            break h;
        }
        len *= 2;
    };
    let total: f64 = h.iter().map(|v| v * v).sum();
    let mut keep = h.len();
    let mut acc = 0.0;
    for (i, v) in h.iter().enumerate().rev() {
        acc += v * v;
        if acc > 1e-16 * total {
            keep = i + 1;
            break;
        }
    }
    let h = &h[..keep];
    let rev: Vec<f64> = h.iter().rev().copied().collect();
    convolve_slices(h, &rev, ConvMode::Full)
}

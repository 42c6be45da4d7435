use ndarray::Array2;

use super::spectral::check_pair;
use crate::dsp::{forward_plan, resample_slice, AudioSegment};
use crate::error::{Error, Result};

const FS: u32 = 10_000;
const FRAME: usize = 256;
const NFFT: usize = 512;
const HOP: usize = FRAME / 2;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per short-time segment (384 ms).
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Hann window without its zero endpoints.
fn inner_hann(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Drops frames more than 40 dB below the loudest reference frame and
/// overlap-adds the rest of both signals.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = inner_hann(FRAME);
    if x.len() < FRAME {
        return (vec![], vec![]);
    }
    let starts: Vec<usize> = (0..=x.len() - FRAME).step_by(HOP).collect();
    let frame = |s: &[f64], i: usize| -> Vec<f64> { (0..FRAME).map(|n| w[n] * s[i + n]).collect() };
    let energies: Vec<f64> = starts
        .iter()
        .map(|&i| 20.0 * (frame(x, i).iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10())
        .collect();
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| top - DYN_RANGE_DB - e < 0.0)
        .map(|(&i, _)| i)
        .collect();
    if kept.is_empty() {
        return (vec![], vec![]);
    }
    let len = (kept.len() - 1) * HOP + FRAME;
    let mut xs = vec![0.0; len];
    let mut ys = vec![0.0; len];
    for (k, &i) in kept.iter().enumerate() {
        let (fx, fy) = (frame(x, i), frame(y, i));
        for n in 0..FRAME {
            xs[k * HOP + n] += fx[n];
            ys[k * HOP + n] += fy[n];
        }
    }
    (xs, ys)
}

/// Power spectra of Hann frames, frames x (NFFT/2 + 1).
fn power_frames(x: &[f64]) -> Array2<f64> {
    let w = inner_hann(FRAME);
    let starts: Vec<usize> = if x.len() > FRAME { (0..x.len() - FRAME).step_by(HOP).collect() } else { vec![] };
    let plan = forward_plan(NFFT);
    let mut buf = plan.make_input_vec();
    let mut spec = plan.make_output_vec();
    let mut out = Array2::zeros((starts.len(), NFFT / 2 + 1));
    for (t, &i) in starts.iter().enumerate() {
        buf.fill(0.0);
        for n in 0..FRAME {
            buf[n] = w[n] * x[i + n];
        }
        plan.process(&mut buf, &mut spec).expect("fft buffer sizes match plan");
        for (k, c) in spec.iter().enumerate() {
            out[[t, k]] = c.norm_sqr();
        }
    }
    out
}

/// One-third octave band edges as FFT bin ranges `[lo, hi)`.
fn third_octave_bins() -> Vec<(usize, usize)> {
    let freqs: Vec<f64> = (0..=NFFT / 2).map(|k| k as f64 * FS as f64 / NFFT as f64).collect();
    let nearest = |f: f64| {
        freqs
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bd), (i, &g)| {
                let d = (g - f).powi(2);
                if d < bd {
                    (i, d)
                } else {
                    (bi, bd)
                }
            })
            .0
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, bands x frames.
fn band_envelopes(power: &Array2<f64>) -> Array2<f64> {
    let bands = third_octave_bins();
    let mut out = Array2::zeros((BANDS, power.nrows()));
    for (b, &(lo, hi)) in bands.iter().enumerate() {
        for t in 0..power.nrows() {
            out[[b, t]] = (lo..hi).map(|k| power[[t, k]]).sum::<f64>().sqrt();
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Short-time objective intelligibility of `estimate` against `reference`.
pub fn stoi(reference: &AudioSegment, estimate: &AudioSegment) -> Result<f64> {
    check_pair(reference, estimate)?;
    let sr = reference.sample_rate();
    let x = resample_slice(reference.samples(), sr, FS);
    let y = resample_slice(estimate.samples(), sr, FS);
    let (x, y) = remove_silent_frames(&x, &y);
    let x_tob = band_envelopes(&power_frames(&x));
    let y_tob = band_envelopes(&power_frames(&y));
    let frames = x_tob.ncols();
    if frames < SEGMENT {
        return Err(Error::TooShort(format!(
            "STOI needs {SEGMENT} active frames (384 ms), got {frames}"
        )));
    }
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEGMENT..=frames {
        for b in 0..BANDS {
            let xs: Vec<f64> = (m - SEGMENT..m).map(|t| x_tob[[b, t]]).collect();
            let ys: Vec<f64> = (m - SEGMENT..m).map(|t| y_tob[[b, t]]).collect();
            let g = norm(&xs) / (norm(&ys) + EPS);
            let mut yp: Vec<f64> = ys.iter().zip(&xs).map(|(yv, xv)| (yv * g).min(xv * (1.0 + clip))).collect();
            let mut xc = xs;
            for v in [&mut yp, &mut xc] {
                let mean = v.iter().sum::<f64>() / SEGMENT as f64;
                v.iter_mut().for_each(|a| *a -= mean);
                let n = norm(v) + EPS;
                v.iter_mut().for_each(|a| *a /= n);
            }
            total += yp.iter().zip(&xc).map(|(a, c)| a * c).sum::<f64>();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::AudioSegment;
use crate::error::{invalid, Error, Result};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn RealToComplex<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn ComplexToReal<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Complex short-time spectrum, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Array2<Complex64>,
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm())
    }

    pub fn power(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm_sqr())
    }
}

fn check_params(fft_size: usize, hop: usize) -> Result<()> {
    if fft_size < 2 || fft_size % 2 != 0 {
        return Err(invalid(format!("fft_size must be even and >= 2, got {fft_size}")));
    }
    if hop == 0 || hop > fft_size {
        return Err(invalid(format!("hop must be in 1..=fft_size, got {hop}")));
    }
    Ok(())
}

/// Frame count for a centered STFT of `len` samples.
pub(crate) fn centered_frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

/// STFT with reflective centering: `fft_size/2` samples are mirrored onto
/// both ends, giving `1 + len/hop` frames.
pub fn stft(audio: &AudioSegment, fft_size: usize, hop: usize) -> Result<Spectrogram> {
    check_params(fft_size, hop)?;
    let x = audio.samples();
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    if x.len() < fft_size {
        return Err(Error::TooShort(format!(
            "stft needs at least {fft_size} samples, got {}",
            x.len()
        )));
    }
    let pad = fft_size / 2;
    let len = x.len();
    let mut padded = Vec::with_capacity(len + 2 * pad);
    padded.extend((0..pad).map(|i| x[pad - i]));
    padded.extend_from_slice(x);
    padded.extend((0..pad).map(|j| x[len - 2 - j]));
    let frames = stft_frames(&padded, fft_size, hop, centered_frame_count(len, hop));
    Ok(Spectrogram {
        frames,
        fft_size,
        hop,
        sample_rate: audio.sample_rate(),
    })
}

/// Uncentered frame analysis of an already padded buffer. Frames that run
/// past the end of `padded` see zeros.
pub fn stft_frames(padded: &[f64], fft_size: usize, hop: usize, num_frames: usize) -> Array2<Complex64> {
    let window = hann_window(fft_size);
    let plan = forward_plan(fft_size);
    let bins = fft_size / 2 + 1;
    let mut out = Array2::<Complex64>::zeros((num_frames, bins));
    let mut buf = plan.make_input_vec();
    let mut spec = plan.make_output_vec();
    let mut scratch = plan.make_scratch_vec();
    for t in 0..num_frames {
        let start = t * hop;
        for (n, b) in buf.iter_mut().enumerate() {
            *b = padded.get(start + n).copied().unwrap_or(0.0) * window[n];
        }
        plan.process_with_scratch(&mut buf, &mut spec, &mut scratch)
            .expect("fft buffer sizes match plan");
        out.row_mut(t).iter_mut().zip(&spec).for_each(|(o, s)| *o = *s);
    }
    out
}

/// Weighted overlap-add in the padded (uncentered) domain.
///
/// Returns the unnormalized sum and the squared-window envelope; the
/// least-squares signal is `sum / envelope` wherever the envelope is nonzero.
pub fn overlap_add(frames: &Array2<Complex64>, fft_size: usize, hop: usize) -> (Vec<f64>, Vec<f64>) {
    let window = hann_window(fft_size);
    let plan = inverse_plan(fft_size);
    let num_frames = frames.nrows();
    let total = if num_frames == 0 {
        0
    } else {
        (num_frames - 1) * hop + fft_size
    };
    let mut sum = vec![0.0; total];
    let mut env = vec![0.0; total];
    let mut spec = plan.make_input_vec();
    let mut buf = plan.make_output_vec();
    let mut scratch = plan.make_scratch_vec();
    let scale = 1.0 / fft_size as f64;
    let last = spec.len() - 1;
    for t in 0..num_frames {
        spec.iter_mut().zip(frames.row(t)).for_each(|(s, f)| *s = *f);
        spec[0].im = 0.0;
        spec[last].im = 0.0;
        plan.process_with_scratch(&mut spec, &mut buf, &mut scratch)
            .expect("fft buffer sizes match plan");
        let start = t * hop;
        for n in 0..fft_size {
            sum[start + n] += window[n] * buf[n] * scale;
            env[start + n] += window[n] * window[n];
        }
    }
    (sum, env)
}

/// Inverse of [`stft`] by weighted overlap-add with squared-window
/// normalization. Output is cropped (or zero-extended) to `out_len`.
pub fn istft(spec: &Spectrogram, out_len: usize) -> Result<AudioSegment> {
    check_params(spec.fft_size, spec.hop)?;
    if spec.num_bins() != spec.fft_size / 2 + 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", spec.fft_size / 2 + 1),
            actual: format!("{} bins", spec.num_bins()),
        });
    }
    let pad = spec.fft_size / 2;
    let (sum, env) = overlap_add(&spec.frames, spec.fft_size, spec.hop);
    let mut out = vec![0.0; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        let j = i + pad;
        if j >= sum.len() {
            break;
        }
        if env[j] < 1e-8 {
            return Err(invalid(format!(
                "istft normalization envelope {:.3e} below 1e-8 at sample {i}",
                env[j]
            )));
        }
        *o = sum[j] / env[j];
    }
    AudioSegment::new(out, spec.sample_rate)
}

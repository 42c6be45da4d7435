use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::dsp::{overlap_add, stft, stft_frames, AudioSegment};
use crate::error::{invalid, Error, Result};

/// Phase-recovered waveform and the spectral-convergence residual recorded
/// after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GriffinLim {
    pub audio: AudioSegment,
    pub residuals: Vec<f64>,
}

fn least_squares_signal(frames: &Array2<Complex64>, fft_size: usize, hop: usize) -> Vec<f64> {
    let (sum, env) = overlap_add(frames, fft_size, hop);
    sum.iter()
        .zip(&env)
        .map(|(s, e)| if *e > 1e-12 { s / e } else { 0.0 })
        .collect()
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Iterative phase recovery for a centered-STFT magnitude (frames x bins).
///
/// Works on the padded frame domain so each iterate is the least-squares
/// signal of the current spectrogram; starts from zero phase. `momentum` is
/// the fast Griffin-Lim extrapolation weight. The returned audio is the
/// `out_len` samples under the centered frames.
pub fn griffin_lim(
    magnitude: &Array2<f64>,
    fft_size: usize,
    hop: usize,
    sample_rate: u32,
    out_len: usize,
    iters: usize,
    momentum: f64,
) -> Result<GriffinLim> {
    if magnitude.ncols() != fft_size / 2 + 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", fft_size / 2 + 1),
            actual: format!("{} bins", magnitude.ncols()),
        });
    }
    if magnitude.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("magnitude must be finite and non-negative"));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(invalid(format!("momentum {momentum} outside [0, 1)")));
    }
    let frames = magnitude.nrows();
    let total = norm(magnitude);
    let mut spec = magnitude.mapv(|m| Complex64::new(m, 0.0));
    let mut prev: Option<Array2<Complex64>> = None;
    let mut residuals = Vec::with_capacity(iters);
    let alpha = momentum / (1.0 + momentum);
    for _ in 0..iters {
        let y = least_squares_signal(&spec, fft_size, hop);
        let rebuilt = stft_frames(&y, fft_size, hop, frames);
        let diff = Zip::from(&rebuilt)
            .and(magnitude)
            .fold(0.0, |acc, c, &m| acc + (c.norm() - m).powi(2));
        residuals.push(if total > 0.0 { diff.sqrt() / total } else { 0.0 });
        let mut dir = rebuilt.clone();
        if let Some(p) = &prev {
            Zip::from(&mut dir).and(p).for_each(|d, p| *d -= p * alpha);
        }
        Zip::from(&mut spec).and(&dir).and(magnitude).for_each(|s, d, &m| {
            let n = d.norm();
            *s = if n > 1e-16 { d * (m / n) } else { Complex64::new(m, 0.0) };
        });
        prev = Some(rebuilt);
    }
    let y = least_squares_signal(&spec, fft_size, hop);
    let pad = fft_size / 2;
    let samples: Vec<f64> = (0..out_len).map(|i| y.get(i + pad).copied().unwrap_or(0.0)).collect();
    Ok(GriffinLim {
        audio: AudioSegment::new(samples, sample_rate)?,
        residuals,
    })
}

/// `| |STFT(audio)| - magnitude | / |magnitude|` with the centered STFT.
pub fn spectral_convergence(audio: &AudioSegment, magnitude: &Array2<f64>, fft_size: usize, hop: usize) -> Result<f64> {
    let est = stft(audio, fft_size, hop)?.magnitude();
    if est.dim() != magnitude.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", magnitude.dim()),
            actual: format!("{:?}", est.dim()),
        });
    }
    let total = norm(magnitude);
    if total == 0.0 {
        return Ok(if norm(&est) == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(norm(&(&est - magnitude)) / total)
}

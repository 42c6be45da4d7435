use ndarray::Array2;

use crate::dsp::{stft, AudioSegment};
use crate::error::{Error, Result};

pub const METRIC_FFT: usize = 2048;
pub const METRIC_HOP: usize = 441;
pub const LSD_FLOOR: f64 = 1e-12;

pub(crate) fn check_pair(reference: &AudioSegment, estimate: &AudioSegment) -> Result<()> {
    if reference.len() != estimate.len() || reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} samples at {} Hz", reference.len(), reference.sample_rate()),
            actual: format!("{} samples at {} Hz", estimate.len(), estimate.sample_rate()),
        });
    }
    Ok(())
}

/// Log-spectral distance on power spectra: the per-frame RMS of
/// `log10(|S_ref|^2 + d) - log10(|S_est|^2 + d)` over bins, averaged over frames.
pub fn lsd(reference: &AudioSegment, estimate: &AudioSegment) -> Result<f64> {
    check_pair(reference, estimate)?;
    let pr = stft(reference, METRIC_FFT, METRIC_HOP)?.power();
    let pe = stft(estimate, METRIC_FFT, METRIC_HOP)?.power();
    Ok(lsd_power(&pr, &pe))
}

/// LSD between two power spectrograms (frames x bins).
pub fn lsd_power(reference: &Array2<f64>, estimate: &Array2<f64>) -> f64 {
    let frames = reference.nrows();
    let bins = reference.ncols() as f64;
    let total: f64 = reference
        .rows()
        .into_iter()
        .zip(estimate.rows())
        .map(|(r, e)| {
            let ms: f64 = r
                .iter()
                .zip(e.iter())
                .map(|(a, b)| ((a + LSD_FLOOR).log10() - (b + LSD_FLOOR).log10()).powi(2))
                .sum::<f64>()
                / bins;
            ms.sqrt()
        })
        .sum();
    total / frames as f64
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter keeping only fully covered windows.
fn filter_valid(img: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for i in 0..h {
        for j in 0..ow {
            rows[[i, j]] = (0..n).map(|t| img[[i, j + t]] * k[t]).sum();
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for i in 0..oh {
        for j in 0..ow {
            out[[i, j]] = (0..n).map(|t| rows[[i + t, j]] * k[t]).sum();
        }
    }
    out
}

/// Mean SSIM of two equally sized images with an 11x11 Gaussian window.
pub fn ssim_image(a: &Array2<f64>, b: &Array2<f64>, data_range: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.dim()),
            actual: format!("{:?}", b.dim()),
        });
    }
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooShort(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let k = gaussian_kernel();
    let mu_a = filter_valid(a, &k);
    let mu_b = filter_valid(b, &k);
    let aa = filter_valid(&(a * a), &k);
    let bb = filter_valid(&(b * b), &k);
    let ab = filter_valid(&(a * b), &k);
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let mut total = 0.0;
    for idx in 0..mu_a.len() {
        let (i, j) = (idx / mu_a.ncols(), idx % mu_a.ncols());
        let (ma, mb) = (mu_a[[i, j]], mu_b[[i, j]]);
        let va = aa[[i, j]] - ma * ma;
        let vb = bb[[i, j]] - mb * mb;
        let cov = ab[[i, j]] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

/// SSIM of magnitude spectrograms, with the dynamic range taken from the
/// reference.
pub fn ssim_spec(reference: &AudioSegment, estimate: &AudioSegment) -> Result<f64> {
    check_pair(reference, estimate)?;
    let r = stft(reference, METRIC_FFT, METRIC_HOP)?.magnitude();
    let e = stft(estimate, METRIC_FFT, METRIC_HOP)?.magnitude();
    let range = r.iter().cloned().fold(0.0, f64::max);
    ssim_image(&r, &e, if range > 0.0 { range } else { 1.0 })
}

pub const SI_SDR_CAP: f64 = 100.0;

/// Scale-invariant SDR in dB, limited to `[-100, 100]`.
pub fn si_sdr(reference: &AudioSegment, estimate: &AudioSegment) -> Result<f64> {
    check_pair(reference, estimate)?;
    let r = reference.samples();
    let e = estimate.samples();
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::UndefinedSnr("reference"));
    }
    let alpha = r.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / rr;
    let target: f64 = alpha * alpha * rr;
    let noise: f64 = r.iter().zip(e).map(|(a, b)| (b - alpha * a).powi(2)).sum();
    let db = if noise == 0.0 {
        SI_SDR_CAP
    } else if target == 0.0 {
        -SI_SDR_CAP
    } else {
        10.0 * (target / noise).log10()
    };
    Ok(db.clamp(-SI_SDR_CAP, SI_SDR_CAP))
}

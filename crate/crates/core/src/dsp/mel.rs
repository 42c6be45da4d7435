use ndarray::{Array2, ArrayView2};

use crate::error::{invalid, Error, Result};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters, stored bins x mels.
///
/// Each column is scaled so its largest tap is exactly 1.0. Columns are never
/// divided by their bandwidth, so wide high-frequency bands keep their full
/// energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    pub sample_rate: u32,
    pub fft_size: usize,
    pub num_mels: usize,
}

impl MelFilterbank {
    pub fn num_bins(&self) -> usize {
        self.weights.nrows()
    }

    /// Inclusive bin range where column `band` is nonzero.
    pub fn support(&self, band: usize) -> (usize, usize) {
        let col = self.weights.column(band);
        let first = col.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = col.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        (first, last)
    }
}

pub fn build_mel_filterbank(sample_rate: u32, fft_size: usize, num_mels: usize) -> Result<MelFilterbank> {
    if num_mels == 0 {
        return Err(invalid("num_mels must be >= 1"));
    }
    if fft_size < 2 || fft_size % 2 != 0 {
        return Err(invalid(format!("fft_size must be even, got {fft_size}")));
    }
    if sample_rate == 0 {
        return Err(invalid("sample_rate must be positive"));
    }
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let mut edges: Vec<f64> = (0..num_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (num_mels + 1) as f64))
        .collect();
    edges[0] = 0.0;
    edges[num_mels + 1] = nyquist;
    let bin_hz: Vec<f64> = (0..bins)
        .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
        .collect();

    let mut weights = Array2::<f64>::zeros((bins, num_mels));
    for m in 0..num_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut col_max = 0.0f64;
        for (k, &f) in bin_hz.iter().enumerate() {
            let rise = (f - lo) / (mid - lo);
            let fall = (hi - f) / (hi - mid);
            let w = rise.min(fall).max(0.0);
            weights[[k, m]] = w;
            col_max = col_max.max(w);
        }
        if col_max <= 0.0 {
            return Err(Error::DegenerateFilterbank { band: m });
        }
        weights.column_mut(m).mapv_inplace(|w| w / col_max);
    }
    Ok(MelFilterbank {
        weights,
        sample_rate,
        fft_size,
        num_mels,
    })
}

/// Non-negative mel projection of a magnitude spectrogram, frames x mels.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Array2<f64>,
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl MelSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_mels(&self) -> usize {
        self.frames.ncols()
    }

    pub fn with_frames(&self, frames: Array2<f64>) -> Self {
        Self {
            frames,
            fft_size: self.fft_size,
            hop: self.hop,
            sample_rate: self.sample_rate,
        }
    }
}

/// `|X| W`: magnitude (frames x bins) times the filterbank (bins x mels).
pub fn apply_mel(magnitude: ArrayView2<f64>, fb: &MelFilterbank, hop: usize) -> Result<MelSpectrogram> {
    if magnitude.ncols() != fb.num_bins() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", fb.num_bins()),
            actual: format!("{} bins", magnitude.ncols()),
        });
    }
    let frames = magnitude.dot(&fb.weights);
    Ok(MelSpectrogram {
        frames,
        fft_size: fb.fft_size,
        hop,
        sample_rate: fb.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_bank_shape_and_peaks() {
        let fb = build_mel_filterbank(44100, 2048, 128).unwrap();
        assert_eq!(fb.weights.dim(), (1025, 128));
        for m in 0..128 {
            let col = fb.weights.column(m);
            assert!(col.iter().any(|&w| w > 0.0));
            assert_eq!(col.iter().cloned().fold(0.0, f64::max), 1.0);
        }
        assert_eq!(fb.weights.iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(fb.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn not_area_normalized() {
        // a wide high band sums to far more than a narrow low band
        let fb = build_mel_filterbank(44100, 2048, 128).unwrap();
        let low: f64 = fb.weights.column(5).sum();
        let high: f64 = fb.weights.column(120).sum();
        assert!(high > 5.0 * low, "low {low} high {high}");
    }

    #[test]
    fn single_band_covers_spectrum() {
        let fb = build_mel_filterbank(44100, 2048, 1).unwrap();
        let (first, last) = fb.support(0);
        assert_eq!(first, 1);
        assert_eq!(last, 1023);
    }

    #[test]
    fn row_sums_positive_inside_span() {
        let fb = build_mel_filterbank(44100, 2048, 128).unwrap();
        let (first, _) = fb.support(0);
        let (_, last) = fb.support(127);
        for k in first..=last {
            assert!(fb.weights.row(k).sum() > 0.0, "bin {k}");
        }
    }

    #[test]
    fn too_many_bands_is_degenerate() {
        assert!(matches!(
            build_mel_filterbank(44100, 256, 2000),
            Err(Error::DegenerateFilterbank { .. })
        ));
        assert!(build_mel_filterbank(44100, 2048, 0).is_err());
    }

    #[test]
    fn apply_mel_matches_double_loop() {
        let fb = build_mel_filterbank(16000, 512, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mag = Array2::from_shape_fn((7, 257), |_| rng.gen_range(0.0..2.0));
        let mel = apply_mel(mag.view(), &fb, 128).unwrap();
        for t in 0..7 {
            for m in 0..40 {
                let mut acc = 0.0;
                for k in 0..257 {
                    acc += mag[[t, k]] * fb.weights[[k, m]];
                }
                assert!((acc - mel.frames[[t, m]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_hot_selects_row() {
        let fb = build_mel_filterbank(44100, 2048, 128).unwrap();
        let mut mag = Array2::zeros((1, 1025));
        mag[[0, 300]] = 1.0;
        let mel = apply_mel(mag.view(), &fb, 441).unwrap();
        assert_eq!(mel.frames.row(0), fb.weights.row(300));
        let zero = apply_mel(Array2::zeros((3, 1025)).view(), &fb, 441).unwrap();
        assert!(zero.frames.iter().all(|&v| v == 0.0));
        assert!(apply_mel(Array2::zeros((3, 1024)).view(), &fb, 441).is_err());
    }
}

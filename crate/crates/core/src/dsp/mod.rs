//! Deterministic signal-processing primitives shared by every other module.

mod audio;
mod convolve;
mod filter;
mod mel;
mod resample;
mod stft;

pub use audio::AudioSegment;
pub use convolve::{convolve, convolve_slices, ConvMode};
pub use filter::{design_lowpass, FilterKind, FirFilter};
pub(crate) use filter::sinc as filter_sinc;
pub use mel::{apply_mel, build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilterbank, MelSpectrogram};
pub use resample::{resample, resample_slice};
pub(crate) use stft::{forward_plan, inverse_plan};
pub use stft::{hann_window, istft, overlap_add, stft, stft_frames, Spectrogram};

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

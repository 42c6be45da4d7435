use crate::dsp::{self, design_lowpass, resample_slice, AudioSegment, ConvMode, FilterKind};
use crate::error::{invalid, Error, Result};

/// Loops or crops `noise` to exactly `len` samples.
pub fn fit_noise(noise: &[f64], len: usize) -> Vec<f64> {
    if noise.is_empty() {
        return vec![0.0; len];
    }
    noise.iter().copied().cycle().take(len).collect()
}

/// Gain `g` such that `20 log10(rms(s) / rms(g n)) == snr_db`.
pub fn noise_gain(s: &[f64], n: &[f64], snr_db: f64) -> Result<f64> {
    let rs = dsp::rms(s);
    let rn = dsp::rms(n);
    if rs == 0.0 {
        return Err(Error::UndefinedSnr("speech"));
    }
    if rn == 0.0 {
        return Err(Error::UndefinedSnr("noise"));
    }
    Ok(rs / (rn * 10f64.powf(snr_db / 20.0)))
}

/// `s + g n` at the requested SNR. The mixture is not re-normalized.
pub fn apply_noise(s: &AudioSegment, n: &AudioSegment, snr_db: f64) -> Result<AudioSegment> {
    if s.sample_rate() != n.sample_rate() {
        return Err(invalid(format!(
            "speech at {} Hz but noise at {} Hz",
            s.sample_rate(),
            n.sample_rate()
        )));
    }
    if !snr_db.is_finite() {
        return Err(invalid("snr_db must be finite"));
    }
    let noise = fit_noise(n.samples(), s.len());
    let g = noise_gain(s.samples(), &noise, snr_db)?;
    s.with_samples(s.samples().iter().zip(&noise).map(|(a, b)| a + g * b).collect())
}

/// Peak-normalizes `rir` and drops everything before its direct path.
pub fn normalize_rir(rir: &[f64]) -> Result<Vec<f64>> {
    if rir.is_empty() {
        return Err(invalid("rir is empty"));
    }
    let (peak_idx, peak) = rir
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv.abs() { (i, v) } else { (bi, bv) });
    if peak == 0.0 {
        return Err(invalid("rir is all zeros"));
    }
    Ok(rir[peak_idx..].iter().map(|v| v / peak).collect())
}

/// Same-length convolution with the direct-path-aligned, peak-normalized RIR.
pub fn apply_reverb(s: &AudioSegment, rir: &[f64]) -> Result<AudioSegment> {
    apply_reverb_wet(s, rir, 1.0)
}

/// As [`apply_reverb`], with the reverberant tail (everything after the
/// direct path) scaled by `wet`.
pub fn apply_reverb_wet(s: &AudioSegment, rir: &[f64], wet: f64) -> Result<AudioSegment> {
    if !(0.0..=1.0).contains(&wet) {
        return Err(invalid(format!("wet level {wet} outside [0, 1]")));
    }
    let mut r = normalize_rir(rir)?;
    r.iter_mut().skip(1).for_each(|v| *v *= wet);
    s.with_samples(dsp::convolve_slices(s.samples(), &r, ConvMode::SameLength))
}

pub fn apply_clip(s: &AudioSegment, eta: f64) -> Result<AudioSegment> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("clipping level {eta} outside [0, 1]")));
    }
    s.with_samples(s.samples().iter().map(|&v| v.min(eta).max(-eta)).collect())
}

/// Lowpass at `cutoff`, resample to `2 * cutoff`, and optionally resample
/// back to the original rate with the original length.
pub fn apply_low_bandwidth(
    s: &AudioSegment,
    cutoff: f64,
    kind: FilterKind,
    restore_rate: bool,
) -> Result<AudioSegment> {
    let rate = s.sample_rate();
    if !(cutoff.is_finite() && 2.0 * cutoff >= 1000.0 && 2.0 * cutoff <= rate as f64) {
        return Err(invalid(format!(
            "cutoff {cutoff} Hz outside [500, {}] Hz",
            rate as f64 / 2.0
        )));
    }
    let target = (2.0 * cutoff).round() as u32;
    if target >= rate {
        return Ok(s.clone());
    }
    let filter = design_lowpass(cutoff, rate, kind)?;
    let filtered = filter.apply(s.samples());
    let low = resample_slice(&filtered, rate, target);
    if !restore_rate {
        return AudioSegment::new(low, target);
    }
    let mut back = resample_slice(&low, target, rate);
    back.resize(s.len(), 0.0);
    AudioSegment::new(back, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seg(x: Vec<f64>) -> AudioSegment {
        AudioSegment::new(x, 44100).unwrap()
    }

    fn random(seed: u64, len: usize, amp: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
    }

    fn constant_rms(len: usize, value: f64, alternate: bool) -> Vec<f64> {
        (0..len)
            .map(|i| if alternate && i % 2 == 1 { -value } else { value })
            .collect()
    }

    #[test]
    fn equal_power_gains() {
        let s = constant_rms(1000, 0.1, false);
        let n = constant_rms(1000, 0.1, true);
        assert!((noise_gain(&s, &n, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((noise_gain(&s, &n, 20.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn measured_snr_matches() {
        for seed in 0..20 {
            let s = seg(random(seed, 5000, 0.5));
            let n = seg(random(seed + 100, 3000, 0.2));
            let snr = (seed as f64) * 2.5 - 10.0;
            let x = apply_noise(&s, &n, snr).unwrap();
            let resid: Vec<f64> = x.samples().iter().zip(s.samples()).map(|(a, b)| a - b).collect();
            let measured = 20.0 * (dsp::rms(s.samples()) / dsp::rms(&resid)).log10();
            assert!((measured - snr).abs() < 1e-6, "{measured} vs {snr}");
        }
    }

    #[test]
    fn silent_inputs_have_undefined_snr() {
        let z = seg(vec![0.0; 100]);
        let s = seg(random(1, 100, 1.0));
        assert!(matches!(apply_noise(&z, &s, 0.0), Err(Error::UndefinedSnr(_))));
        assert!(matches!(apply_noise(&s, &z, 0.0), Err(Error::UndefinedSnr(_))));
    }

    #[test]
    fn reverb_normalization() {
        let s = seg(random(2, 500, 1.0));
        assert_eq!(apply_reverb(&s, &[1.0]).unwrap(), s);
        assert_eq!(apply_reverb(&s, &[0.0, 0.0, 0.5]).unwrap(), s);
        assert!(apply_reverb(&s, &[0.0, 0.0]).is_err());
        assert!(apply_reverb(&s, &[]).is_err());
    }

    #[test]
    fn reverb_tail_has_energy() {
        let mut x = vec![0.0; 4000];
        x[..1000].copy_from_slice(&random(3, 1000, 1.0));
        let rir = [1.0, 0.0, 0.3, -0.2, 0.1, 0.05];
        let y = apply_reverb(&seg(x), &rir).unwrap();
        let tail: f64 = y.samples()[1000..].iter().map(|v| v * v).sum();
        assert!(tail > 0.0);
    }

    #[test]
    fn clip_examples() {
        let y = apply_clip(&seg(vec![0.5, -0.9, 0.1]), 0.25).unwrap();
        assert_eq!(y.samples(), &[0.25, -0.25, 0.1]);
        let s = seg(random(4, 100, 1.0));
        assert_eq!(apply_clip(&s, 1.0).unwrap(), s);
        assert!(apply_clip(&s, 1.5).is_err());
        assert!(apply_clip(&s, -0.1).is_err());
    }

    #[test]
    fn full_band_is_identity() {
        let s = seg(random(5, 3000, 1.0));
        let y = apply_low_bandwidth(&s, 22050.0, FilterKind::default(), true).unwrap();
        assert_eq!(y, s);
        assert!(apply_low_bandwidth(&s, 400.0, FilterKind::default(), true).is_err());
        assert!(apply_low_bandwidth(&s, 30000.0, FilterKind::default(), true).is_err());
    }

    #[test]
    fn restore_rate_keeps_length() {
        let s = seg(random(6, 10007, 1.0));
        for cutoff in [1000.0, 3333.3, 8000.0] {
            let y = apply_low_bandwidth(&s, cutoff, FilterKind::Butterworth { order: 4 }, true).unwrap();
            assert_eq!(y.len(), s.len());
            assert_eq!(y.sample_rate(), 44100);
        }
        let low = apply_low_bandwidth(&s, 4000.0, FilterKind::default(), false).unwrap();
        assert_eq!(low.sample_rate(), 8000);
    }

    #[test]
    fn lowpass_band_energy() {
        let n = 44100;
        let s = seg(random(8, n, 1.0));
        let y = apply_low_bandwidth(&s, 2000.0, FilterKind::default(), true).unwrap();
        let mut buf = y.samples().to_vec();
        let mut spec = realfft::RealFftPlanner::<f64>::new().plan_fft_forward(n).make_output_vec();
        realfft::RealFftPlanner::<f64>::new()
            .plan_fft_forward(n)
            .process(&mut buf, &mut spec)
            .unwrap();
        let power: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        let edge = 2300 * n / 44100;
        let above: f64 = power[edge..].iter().sum();
        assert!(10.0 * (above / total).log10() < -40.0, "{above} / {total}");
    }

    proptest! {
        #[test]
        fn clip_idempotent_and_bounded(x in prop::collection::vec(-2.0f64..2.0, 1..300), eta in 0.0f64..1.0) {
            let s = AudioSegment::new(x, 16000).unwrap();
            let once = apply_clip(&s, eta).unwrap();
            let twice = apply_clip(&once, eta).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(dsp::peak(once.samples()) <= eta);
        }

        #[test]
        fn noise_residual_recovers_speech(seed in 0u64..1000, snr in -10.0f64..40.0) {
            let s = random(seed, 256, 1.0);
            let n = random(seed ^ 0xdead, 256, 1.0);
            let g = noise_gain(&s, &n, snr).unwrap();
            let x = apply_noise(&seg(s.clone()), &seg(n.clone()), snr).unwrap();
            for ((xv, sv), nv) in x.samples().iter().zip(&s).zip(&n) {
                let scale = sv.abs().max((g * nv).abs());
                prop_assert!((xv - g * nv - sv).abs() <= 2.0 * f64::EPSILON * scale);
            }
        }
    }
}

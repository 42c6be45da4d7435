use num_complex::Complex64;

use super::stft::{forward_plan, inverse_plan};
use super::{next_pow2, AudioSegment};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// `len(a) + len(b) - 1` samples.
    Full,
    /// First `len(a)` samples of the full result.
    SameLength,
}

const DIRECT_LIMIT: usize = 64;

/// Linear convolution of two sequences, FFT-based once the shorter one
/// exceeds a few dozen taps.
pub fn convolve_slices(a: &[f64], b: &[f64], mode: ConvMode) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let full_len = a.len() + b.len() - 1;
    let out_len = match mode {
        ConvMode::Full => full_len,
        ConvMode::SameLength => a.len(),
    };
    let mut full = if a.len().min(b.len()) <= DIRECT_LIMIT {
        direct(a, b, out_len)
    } else {
        fft_convolve(a, b)
    };
    full.truncate(out_len);
    full
}

fn direct(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (i, &av) in a.iter().enumerate() {
        if i >= out_len {
            break;
        }
        for (j, &bv) in b.iter().enumerate() {
            let k = i + j;
            if k >= out_len {
                break;
            }
            out[k] += av * bv;
        }
    }
    out
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let full_len = a.len() + b.len() - 1;
    let n = next_pow2(full_len);
    let fwd = forward_plan(n);
    let inv = inverse_plan(n);
    let spectrum = |x: &[f64]| -> Vec<Complex64> {
        let mut buf = fwd.make_input_vec();
        buf[..x.len()].copy_from_slice(x);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("fft buffer sizes match plan");
        out
    };
    let sa = spectrum(a);
    let sb = spectrum(b);
    let mut prod: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
    let last = prod.len() - 1;
    prod[0].im = 0.0;
    prod[last].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut prod, &mut out).expect("fft buffer sizes match plan");
    let scale = 1.0 / n as f64;
    out.truncate(full_len);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

pub fn convolve(audio: &AudioSegment, kernel: &[f64], mode: ConvMode) -> Result<AudioSegment> {
    if kernel.is_empty() {
        return Err(invalid("convolution kernel is empty"));
    }
    audio.with_samples(convolve_slices(audio.samples(), kernel, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for i in 0..a.len() {
            for j in 0..b.len() {
                out[i + j] += a[i] * b[j];
            }
        }
        out
    }

    #[test]
    fn identity_and_delay() {
        let a = AudioSegment::new(vec![1.0, 2.0, 3.0], 8000).unwrap();
        assert_eq!(convolve(&a, &[1.0], ConvMode::SameLength).unwrap(), a);
        let d = convolve(&a, &[0.0, 1.0], ConvMode::SameLength).unwrap();
        assert_eq!(d.samples(), &[0.0, 1.0, 2.0]);
        assert_eq!(
            convolve(&a, &[0.0, 1.0], ConvMode::Full).unwrap().samples(),
            &[0.0, 1.0, 2.0, 3.0]
        );
        assert!(convolve(&a, &[], ConvMode::Full).is_err());
    }

    #[test]
    fn fft_path_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for k in [&b, &c] {
            let got = convolve_slices(&a, k, ConvMode::Full);
            let want = naive(&a, k);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn commutative(a in prop::collection::vec(-1.0f64..1.0, 1..200),
                       b in prop::collection::vec(-1.0f64..1.0, 1..200)) {
            let ab = convolve_slices(&a, &b, ConvMode::Full);
            let ba = convolve_slices(&b, &a, ConvMode::Full);
            prop_assert_eq!(ab.len(), ba.len());
            for (x, y) in ab.iter().zip(&ba) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

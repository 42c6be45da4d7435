use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dsp::{peak, AudioSegment};
use crate::error::Result;

/// Formant frequencies (Hz) and bandwidths of a few vowels.
const VOWELS: [[(f64, f64); 4]; 6] = [
    [(730.0, 90.0), (1090.0, 110.0), (2440.0, 170.0), (3400.0, 250.0)],
    [(270.0, 60.0), (2290.0, 100.0), (3010.0, 170.0), (3700.0, 250.0)],
    [(530.0, 70.0), (1840.0, 100.0), (2480.0, 160.0), (3500.0, 250.0)],
    [(570.0, 80.0), (840.0, 90.0), (2410.0, 160.0), (3400.0, 250.0)],
    [(300.0, 60.0), (870.0, 90.0), (2240.0, 160.0), (3300.0, 250.0)],
    [(640.0, 80.0), (1190.0, 100.0), (2390.0, 160.0), (3500.0, 250.0)],
];

/// Two-pole resonator with unit gain at DC.
#[derive(Clone, Copy, Default)]
struct Resonator {
    a1: f64,
    a2: f64,
    g: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bw: f64, fs: f64) {
        let r = (-std::f64::consts::PI * bw / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * freq / fs;
        self.a1 = 2.0 * r * theta.cos();
        self.a2 = -r * r;
        self.g = 1.0 - self.a1 - self.a2;
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.g * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Glottal flow derivative shape over one period.
fn glottal(phase: f64) -> f64 {
    const OPEN: f64 = 0.45;
    const CLOSE: f64 = 0.7;
    if phase < OPEN {
        (std::f64::consts::PI * phase / OPEN).sin()
    } else if phase < CLOSE {
        -1.6 * (std::f64::consts::PI * (phase - OPEN) / (2.0 * (CLOSE - OPEN))).sin()
    } else {
        0.0
    }
}

/// Speaker-dependent settings drawn once per utterance.
struct Speaker {
    f0: f64,
    formant_scale: f64,
    breath: f64,
}

/// Deterministic speech-like signal: syllables with a glottal source shaped
/// by vowel formants, fricative and plosive onsets, pitch declination, and
/// pauses between words. Peak-normalized to 1.
pub fn synth_utterance(len: usize, sample_rate: u32, seed: u64) -> Result<AudioSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let speaker = Speaker {
        f0: if rng.gen_bool(0.5) { rng.gen_range(95.0..140.0) } else { rng.gen_range(170.0..240.0) },
        formant_scale: rng.gen_range(0.9..1.15),
        breath: rng.gen_range(0.01..0.04),
    };
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = vec![0.0; len];
    let mut pos = (rng.gen_range(0.05..0.2) * fs) as usize;
    let mut phase = 0.0;
    let mut res = [Resonator::default(); 4];
    let mut fric = [Resonator::default(); 2];
    let mut word_left = rng.gen_range(1..4);
    while pos < len {
        let progress = pos as f64 / len as f64;
        // onset consonant
        let onset = rng.gen_range(0..3);
        if onset > 0 {
            let dur = (rng.gen_range(0.03..0.11) * fs) as usize;
            let centre = rng.gen_range(2500.0..7000.0);
            fric[0].tune(centre, centre * 0.35, fs);
            fric[1].tune(centre * 1.3, centre * 0.5, fs);
            let gain = rng.gen_range(0.05..0.25) * if onset == 2 { 2.0 } else { 1.0 };
            for i in 0..dur {
                let Some(o) = out.get_mut(pos + i) else { break };
                let t = i as f64 / dur as f64;
                let env = if onset == 2 { (-6.0 * t).exp() } else { (std::f64::consts::PI * t).sin() };
                let n: f64 = white.sample(&mut rng);
                // differentiate to tilt the noise upward
                let band = fric[0].tick(n);
                let y = fric[1].tick(band);
                *o += gain * env * y * 4.0;
            }
            pos += dur;
        }
        // voiced nucleus, gliding between two vowels
        let dur = (rng.gen_range(0.09..0.26) * fs) as usize;
        let (va, vb) = (VOWELS[rng.gen_range(0..VOWELS.len())], VOWELS[rng.gen_range(0..VOWELS.len())]);
        let loud = rng.gen_range(0.5..1.0);
        let accent = rng.gen_range(0.9..1.25);
        let mut prev = 0.0;
        for i in 0..dur {
            if pos + i >= len {
                break;
            }
            let t = i as f64 / dur as f64;
            if i % 64 == 0 {
                for (k, r) in res.iter_mut().enumerate() {
                    let f = (va[k].0 * (1.0 - t) + vb[k].0 * t) * speaker.formant_scale;
                    r.tune(f.min(0.45 * fs), va[k].1, fs);
                }
            }
            let f0 = speaker.f0 * accent * (1.0 - 0.25 * progress) * (1.0 + 0.05 * (2.0 * std::f64::consts::PI * 4.0 * t).sin());
            phase += f0 * (1.0 + 0.01 * white.sample(&mut rng)) / fs;
            phase -= phase.floor();
            let src = glottal(phase) + speaker.breath * white.sample(&mut rng);
            // parallel formants, weaker with order
            let mut y = 0.0;
            for (k, r) in res.iter_mut().enumerate() {
                y += r.tick(src) * [1.0, 0.6, 0.3, 0.15][k];
            }
            let radiated = y - 0.88 * prev;
            prev = y;
            let env = (t / 0.15).min(1.0) * ((1.0 - t) / 0.25).min(1.0);
            out[pos + i] += loud * env * radiated * 8.0;
        }
        pos += dur;
        word_left -= 1;
        if word_left == 0 {
            pos += (rng.gen_range(0.04..0.3) * fs) as usize;
            word_left = rng.gen_range(1..4);
        } else {
            pos += (rng.gen_range(0.0..0.03) * fs) as usize;
        }
    }
    let p = peak(&out);
    if p > 0.0 {
        out.iter_mut().for_each(|v| *v /= p);
    }
    // recording noise floor around -70 dB
    let floor = 10f64.powf(-70.0 / 20.0);
    for v in out.iter_mut() {
        *v += floor * white.sample(&mut rng);
    }
    let p = peak(&out);
    out.iter_mut().for_each(|v| *v /= p);
    AudioSegment::new(out, sample_rate)
}

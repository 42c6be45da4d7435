//! Two-stage restoration: mel analysis with a mask estimator, then mel
//! inversion and phase recovery.

mod griffin_lim;
mod invert;

use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use griffin_lim::{griffin_lim, spectral_convergence, GriffinLim};
pub use invert::{mel_to_linear, Inversion, MelInverter, NNLS_MAX_SWEEPS, NNLS_TOL};

use crate::dsp::{apply_mel, build_mel_filterbank, stft, AudioSegment, MelFilterbank, MelSpectrogram};
use crate::error::{invalid, Error, Result};
use crate::nn::{apply_mask, load_checkpoint, MaskNet};
use crate::MODEL_SAMPLE_RATE;

/// Source of the restored mel spectrogram.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Estimator {
    /// Mask computed from the clean target, so the output is the target mel.
    #[default]
    Oracle,
    /// The degraded mel, unchanged.
    Identity,
    /// An empty path means the final checkpoint of the current run.
    Trained {
        #[serde(default)]
        checkpoint: PathBuf,
    },
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Oracle => "oracle",
            Estimator::Identity => "identity",
            Estimator::Trained { .. } => "trained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub num_mels: usize,
    pub epsilon: f64,
    pub estimator: Estimator,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fft_size: 2048,
            hop: 441,
            num_mels: 128,
            epsilon: 1e-8,
            estimator: Estimator::Oracle,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        if self.fft_size < 2 || self.fft_size % 2 != 0 || self.hop == 0 || self.hop > self.fft_size {
            return Err(invalid("fft_size must be even and hop in 1..=fft_size"));
        }
        if self.num_mels == 0 {
            return Err(invalid("num_mels must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub griffin_lim_iters: usize,
    pub inversion: Inversion,
    pub momentum: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            griffin_lim_iters: 32,
            inversion: Inversion::Nnls,
            momentum: 0.99,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// Analysis and synthesis with the filterbank, its inverse and any trained
/// network prepared once.
#[derive(Debug, Clone)]
pub struct Restorer {
    pub analysis: AnalysisConfig,
    pub synthesis: SynthesisConfig,
    fb: MelFilterbank,
    inverter: MelInverter,
    net: Option<MaskNet>,
}

impl Restorer {
    pub fn new(analysis: AnalysisConfig, synthesis: SynthesisConfig) -> Result<Self> {
        analysis.validate()?;
        synthesis.validate()?;
        let net = match &analysis.estimator {
            Estimator::Trained { checkpoint } => Some(load_checkpoint(checkpoint)?.0),
            _ => None,
        };
        Self::build(analysis, synthesis, net)
    }

    /// Trained-mode restorer around an in-memory network.
    pub fn with_net(analysis: AnalysisConfig, synthesis: SynthesisConfig, net: MaskNet) -> Result<Self> {
        analysis.validate()?;
        synthesis.validate()?;
        Self::build(analysis, synthesis, Some(net))
    }

    fn build(analysis: AnalysisConfig, synthesis: SynthesisConfig, net: Option<MaskNet>) -> Result<Self> {
        if let Some(n) = &net {
            if n.config.num_mels != analysis.num_mels {
                return Err(Error::ShapeMismatch {
                    expected: format!("network over {} mel bands", analysis.num_mels),
                    actual: format!("{} mel bands", n.config.num_mels),
                });
            }
        }
        let fb = build_mel_filterbank(MODEL_SAMPLE_RATE, analysis.fft_size, analysis.num_mels)?;
        let inverter = MelInverter::new(&fb)?;
        Ok(Self {
            analysis,
            synthesis,
            fb,
            inverter,
            net,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.fb
    }

    /// `|STFT(x)| W` at the model rate.
    pub fn mel(&self, x: &AudioSegment) -> Result<MelSpectrogram> {
        if x.sample_rate() != MODEL_SAMPLE_RATE {
            return Err(invalid(format!(
                "restoration runs at {MODEL_SAMPLE_RATE} Hz, got {} Hz",
                x.sample_rate()
            )));
        }
        let spec = stft(x, self.analysis.fft_size, self.analysis.hop)?;
        apply_mel(spec.magnitude().view(), &self.fb, self.analysis.hop)
    }

    /// Restored mel spectrogram for `x`; oracle mode needs the aligned clean
    /// `target`.
    pub fn analyze(&self, x: &AudioSegment, target: Option<&AudioSegment>) -> Result<MelSpectrogram> {
        let x_mel = self.mel(x)?;
        let eps = self.analysis.epsilon;
        match &self.analysis.estimator {
            Estimator::Identity => Ok(x_mel),
            Estimator::Oracle => {
                let target = target.ok_or(Error::MissingTarget("oracle analysis needs the clean target"))?;
                if target.len() != x.len() || target.sample_rate() != x.sample_rate() {
                    return Err(Error::ShapeMismatch {
                        expected: format!("target of {} samples at {} Hz", x.len(), x.sample_rate()),
                        actual: format!("{} samples at {} Hz", target.len(), target.sample_rate()),
                    });
                }
                let s_mel = self.mel(target)?;
                let mask = oracle_mask(&s_mel.frames, &x_mel.frames, eps);
                Ok(x_mel.with_frames(apply_mask(&mask, &x_mel.frames, eps)))
            }
            Estimator::Trained { .. } => {
                let mut net = self.net.clone().ok_or_else(|| invalid("trained estimator without a network"))?;
                let mask = net.forward_mask(&x_mel)?;
                Ok(x_mel.with_frames(apply_mask(&mask, &x_mel.frames, eps)))
            }
        }
    }

    /// Linear magnitude and phase recovery, cropped to `out_len` samples.
    pub fn synthesize(&self, mel: &MelSpectrogram, out_len: usize) -> Result<GriffinLim> {
        let mag = self.inverter.invert(&mel.frames, self.synthesis.inversion)?;
        griffin_lim(
            &mag,
            self.analysis.fft_size,
            self.analysis.hop,
            MODEL_SAMPLE_RATE,
            out_len,
            self.synthesis.griffin_lim_iters,
            self.synthesis.momentum,
        )
    }

    pub fn restore(&self, x: &AudioSegment, target: Option<&AudioSegment>) -> Result<AudioSegment> {
        let mel = self.analyze(x, target)?;
        Ok(self.synthesize(&mel, x.len())?.audio)
    }
}

/// `S / (X + eps)`.
pub fn oracle_mask(clean: &Array2<f64>, degraded: &Array2<f64>, eps: f64) -> Array2<f64> {
    clean / &degraded.mapv(|v| v + eps)
}

/// Restored mel for `x` (see [`Restorer::analyze`]).
pub fn analyze(x: &AudioSegment, cfg: &AnalysisConfig, target: Option<&AudioSegment>) -> Result<MelSpectrogram> {
    Restorer::new(cfg.clone(), SynthesisConfig::default())?.analyze(x, target)
}

/// Full pipeline: analysis, mel inversion, Griffin-Lim. Output has the
/// length and rate of `x`.
pub fn restore_pipeline(
    x: &AudioSegment,
    analysis: &AnalysisConfig,
    synthesis: &SynthesisConfig,
    target: Option<&AudioSegment>,
) -> Result<AudioSegment> {
    Restorer::new(analysis.clone(), synthesis.clone())?.restore(x, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_clip;
    use crate::nn::MaskNetConfig;

    fn tone(len: usize) -> AudioSegment {
        let s = (0..len)
            .map(|i| {
                let t = i as f64 / 44100.0;
                0.5 * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 0.2 * (2.0 * std::f64::consts::PI * 1330.0 * t).sin()
            })
            .collect();
        AudioSegment::new(s, 44100).unwrap()
    }

    #[test]
    fn oracle_reproduces_target_mel() {
        let clean = tone(22050);
        let degraded = apply_clip(&clean, 0.2).unwrap();
        let r = Restorer::new(AnalysisConfig::default(), SynthesisConfig::default()).unwrap();
        let est = r.analyze(&degraded, Some(&clean)).unwrap();
        let target = r.mel(&clean).unwrap();
        let err = (&est.frames - &target.frames).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn oracle_without_target_fails() {
        let x = tone(4410);
        assert!(matches!(
            analyze(&x, &AnalysisConfig::default(), None),
            Err(Error::MissingTarget(_))
        ));
    }

    #[test]
    fn identity_on_clean_is_clean_mel() {
        let x = tone(8820);
        let cfg = AnalysisConfig {
            estimator: Estimator::Identity,
            ..Default::default()
        };
        let r = Restorer::new(cfg, SynthesisConfig::default()).unwrap();
        assert_eq!(r.analyze(&x, None).unwrap(), r.mel(&x).unwrap());
    }

    #[test]
    fn trained_mode_keeps_shape() {
        let x = tone(8820);
        let net = MaskNet::new(MaskNetConfig::default()).unwrap();
        let cfg = AnalysisConfig {
            estimator: Estimator::Trained {
                checkpoint: PathBuf::from("unused"),
            },
            ..Default::default()
        };
        let r = Restorer::with_net(cfg, SynthesisConfig::default(), net).unwrap();
        let y = r.analyze(&x, None).unwrap();
        assert_eq!(y.frames.dim(), r.mel(&x).unwrap().frames.dim());
    }

    #[test]
    fn pipeline_keeps_length_and_silence() {
        let synth = SynthesisConfig {
            griffin_lim_iters: 4,
            ..Default::default()
        };
        let x = tone(10000);
        let y = restore_pipeline(&x, &AnalysisConfig::default(), &synth, Some(&x)).unwrap();
        assert_eq!(y.len(), x.len());
        assert_eq!(y.sample_rate(), 44100);
        let z = AudioSegment::silence(5000, 44100).unwrap();
        let out = restore_pipeline(&z, &AnalysisConfig::default(), &synth, Some(&z)).unwrap();
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_rate_rejected() {
        let x = AudioSegment::silence(4000, 16000).unwrap();
        let cfg = AnalysisConfig {
            estimator: Estimator::Identity,
            ..Default::default()
        };
        assert!(analyze(&x, &cfg, None).is_err());
    }
}

//! Speech restoration toolkit.
//!
//! Simulates compound speech distortions (reverberation, additive noise,
//! clipping, band-limiting), restores speech through a mel-domain
//! mask-estimation analysis stage followed by a phase-recovery synthesis
//! stage, and scores the result with LSD, spectrogram SSIM, STOI and SI-SDR.

pub mod degrade;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod restore;

pub use dsp::{AudioSegment, MelFilterbank, MelSpectrogram, Spectrogram};
pub use error::{Error, Result};

/// Sample rate every model-facing stage operates at.
pub const MODEL_SAMPLE_RATE: u32 = 44_100;

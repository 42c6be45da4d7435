use crate::error::{invalid, Error, Result};

/// A mono, finite-valued block of samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid("sample_rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Same rate, new samples. Re-validates finiteness.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn fit_length(mut self, len: usize) -> Self {
        self.samples.resize(len, 0.0);
        self
    }
}

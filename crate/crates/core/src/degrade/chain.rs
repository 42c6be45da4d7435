use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::{synth_noise, NoiseColor};
use super::ops::{apply_clip, apply_low_bandwidth, apply_noise, apply_reverb_wet, fit_noise, noise_gain};
use super::rir::{sample_room, simulate_rir, RoomSpec};
use crate::dsp::{AudioSegment, FilterKind};
use crate::error::{invalid, Result};

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn fixed(v: f64) -> Self {
        Range(v, v)
    }

    fn validate(&self, what: &str, lo: f64, hi: f64) -> Result<()> {
        let Range(a, b) = *self;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(invalid(format!("{what} range [{a}, {b}] is empty or non-finite")));
        }
        if a < lo || b > hi {
            return Err(invalid(format!("{what} range [{a}, {b}] outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn uniform<R: Rng>(&self, rng: &mut R) -> f64 {
        let x: f64 = rng.gen();
        self.0 + (self.1 - self.0) * x
    }

    fn log_uniform<R: Rng>(&self, rng: &mut R) -> f64 {
        let x: f64 = rng.gen();
        (self.0.ln() + (self.1.ln() - self.0.ln()) * x).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RirSource {
    /// A fresh random room per item.
    #[default]
    Simulated,
    /// WAV files from a directory (resolved relative to the config file).
    Bank { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseSource {
    Synthetic { colors: Vec<NoiseColor> },
    Bank { dir: PathBuf },
}

impl Default for NoiseSource {
    fn default() -> Self {
        NoiseSource::Synthetic {
            colors: NoiseColor::ALL.to_vec(),
        }
    }
}

fn unit_range() -> Range {
    Range::fixed(1.0)
}

fn default_filters() -> Vec<FilterKind> {
    vec![
        FilterKind::default(),
        FilterKind::SincHann,
        FilterKind::Butterworth { order: 8 },
        FilterKind::Chebyshev1 { order: 8, ripple_db: 0.1 },
    ]
}

fn yes() -> bool {
    true
}

/// One member of the distortion set, with the ranges its parameters are
/// drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionSpec {
    Reverb {
        #[serde(default)]
        source: RirSource,
        #[serde(default = "unit_range")]
        wet: Range,
    },
    Noise {
        snr_db: Range,
        #[serde(default)]
        source: NoiseSource,
    },
    Clip {
        eta: Range,
    },
    /// Cutoff is drawn log-uniformly.
    LowBandwidth {
        cutoff_hz: Range,
        #[serde(default = "default_filters")]
        filters: Vec<FilterKind>,
        #[serde(default = "yes")]
        restore_rate: bool,
    },
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistortionSpec::Reverb { wet, .. } => wet.validate("wet", 0.0, 1.0),
            DistortionSpec::Noise { snr_db, source } => {
                snr_db.validate("snr_db", -100.0, 200.0)?;
                if let NoiseSource::Synthetic { colors } = source {
                    if colors.is_empty() {
                        return Err(invalid("synthetic noise needs at least one color"));
                    }
                }
                Ok(())
            }
            DistortionSpec::Clip { eta } => eta.validate("eta", 0.0, 1.0),
            DistortionSpec::LowBandwidth { cutoff_hz, filters, .. } => {
                cutoff_hz.validate("cutoff_hz", 1000.0, 22050.0)?;
                if filters.is_empty() {
                    return Err(invalid("low_bandwidth needs at least one filter kind"));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DistortionSpec::Reverb { .. } => "reverb",
            DistortionSpec::Noise { .. } => "noise",
            DistortionSpec::Clip { .. } => "clip",
            DistortionSpec::LowBandwidth { .. } => "low_bandwidth",
        }
    }
}

/// Concrete parameters drawn for one distortion of one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppliedDistortion {
    Reverb {
        rir_id: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        room: Option<RoomSpec>,
        wet: f64,
    },
    Noise {
        noise_id: String,
        snr_db: f64,
        gain: f64,
    },
    Clip {
        eta: f64,
    },
    LowBandwidth {
        cutoff_hz: f64,
        target_rate: u32,
        filter: String,
        restore_rate: bool,
    },
}

pub type AppliedParams = Vec<AppliedDistortion>;

/// Recorded noise clips and RIRs, keyed by an identifier for manifests.
#[derive(Debug, Clone, Default)]
pub struct ResourceBanks {
    pub noise: Vec<(String, Vec<f64>)>,
    pub rirs: Vec<(String, Vec<f64>)>,
}

/// Ordered, seeded composition of distortions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionChain {
    pub specs: Vec<DistortionSpec>,
    pub master_seed: u64,
    #[serde(skip)]
    pub banks: Arc<ResourceBanks>,
}

impl PartialEq for DistortionChain {
    fn eq(&self, other: &Self) -> bool {
        self.specs == other.specs && self.master_seed == other.master_seed
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-item stream seed derived from the master seed.
pub fn item_seed(master_seed: u64, item_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(item_index))
}

impl DistortionChain {
    pub fn new(specs: Vec<DistortionSpec>, master_seed: u64) -> Result<Self> {
        let chain = Self {
            specs,
            master_seed,
            banks: Arc::new(ResourceBanks::default()),
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Reverb, noise, clipping, then band-limiting, with the default ranges.
    pub fn default_chain(master_seed: u64) -> Self {
        Self {
            specs: vec![
                DistortionSpec::Reverb {
                    source: RirSource::Simulated,
                    wet: unit_range(),
                },
                DistortionSpec::Noise {
                    snr_db: Range(-5.0, 40.0),
                    source: NoiseSource::default(),
                },
                DistortionSpec::Clip { eta: Range(0.1, 1.0) },
                DistortionSpec::LowBandwidth {
                    cutoff_hz: Range(1000.0, 22050.0),
                    filters: default_filters(),
                    restore_rate: true,
                },
            ],
            master_seed,
            banks: Arc::new(ResourceBanks::default()),
        }
    }

    /// A single fixed clipping level.
    pub fn clip_preset(eta: f64, master_seed: u64) -> Result<Self> {
        Self::new(vec![DistortionSpec::Clip { eta: Range::fixed(eta) }], master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        for spec in &self.specs {
            spec.validate()?;
            match spec {
                DistortionSpec::Reverb {
                    source: RirSource::Bank { dir },
                    ..
                } if self.banks.rirs.is_empty() => {
                    return Err(invalid(format!("rir bank {} not loaded or empty", dir.display())));
                }
                DistortionSpec::Noise {
                    source: NoiseSource::Bank { dir },
                    ..
                } if self.banks.noise.is_empty() => {
                    return Err(invalid(format!("noise bank {} not loaded or empty", dir.display())));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn with_banks(mut self, banks: ResourceBanks) -> Self {
        self.banks = Arc::new(banks);
        self
    }

    /// Applies every distortion in order with parameters drawn from the
    /// item's own stream. Equal `(chain, seed, item_index)` always gives
    /// bit-identical output.
    pub fn compose(&self, s: &AudioSegment, item_index: u64) -> Result<(AudioSegment, AppliedParams)> {
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed(self.master_seed, item_index));
        let mut x = s.clone();
        let mut applied = Vec::with_capacity(self.specs.len());
        for spec in &self.specs {
            let (y, params) = self.apply_one(spec, &x, &mut rng)?;
            x = y;
            applied.push(params);
        }
        Ok((x, applied))
    }

    fn apply_one(
        &self,
        spec: &DistortionSpec,
        x: &AudioSegment,
        rng: &mut ChaCha8Rng,
    ) -> Result<(AudioSegment, AppliedDistortion)> {
        match spec {
            DistortionSpec::Reverb { source, wet } => {
                let wet = wet.uniform(rng);
                let (rir_id, room, rir) = match source {
                    RirSource::Simulated => {
                        let room_seed: u64 = rng.gen();
                        let room = sample_room(room_seed);
                        let rir = simulate_rir(&room, x.sample_rate(), room_seed)?;
                        (format!("sim-{room_seed:016x}"), Some(room), rir)
                    }
                    RirSource::Bank { .. } => {
                        let (id, rir) = &self.banks.rirs[rng.gen_range(0..self.banks.rirs.len())];
                        (id.clone(), None, rir.clone())
                    }
                };
                let y = apply_reverb_wet(x, &rir, wet)?;
                Ok((y, AppliedDistortion::Reverb { rir_id, room, wet }))
            }
            DistortionSpec::Noise { snr_db, source } => {
                let snr_db = snr_db.uniform(rng);
                let (noise_id, noise) = match source {
                    NoiseSource::Synthetic { colors } => {
                        let color = colors[rng.gen_range(0..colors.len())];
                        let n = synth_noise(color, x.len(), x.sample_rate(), rng);
                        (color.label().to_string(), n)
                    }
                    NoiseSource::Bank { .. } => {
                        let (id, clip) = &self.banks.noise[rng.gen_range(0..self.banks.noise.len())];
                        let offset = if clip.is_empty() { 0 } else { rng.gen_range(0..clip.len()) };
                        let rotated: Vec<f64> = clip[offset..].iter().chain(&clip[..offset]).copied().collect();
                        (format!("{id}@{offset}"), fit_noise(&rotated, x.len()))
                    }
                };
                let gain = noise_gain(x.samples(), &noise, snr_db)?;
                let y = apply_noise(x, &x.with_samples(noise)?, snr_db)?;
                Ok((y, AppliedDistortion::Noise { noise_id, snr_db, gain }))
            }
            DistortionSpec::Clip { eta } => {
                let eta = eta.uniform(rng);
                Ok((apply_clip(x, eta)?, AppliedDistortion::Clip { eta }))
            }
            DistortionSpec::LowBandwidth {
                cutoff_hz,
                filters,
                restore_rate,
            } => {
                let cutoff = cutoff_hz.log_uniform(rng);
                let kind = filters[rng.gen_range(0..filters.len())];
                let y = apply_low_bandwidth(x, cutoff, kind, *restore_rate)?;
                Ok((
                    y,
                    AppliedDistortion::LowBandwidth {
                        cutoff_hz: cutoff,
                        target_rate: (2.0 * cutoff).round() as u32,
                        filter: kind.label(),
                        restore_rate: *restore_rate,
                    },
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speechish(len: usize) -> AudioSegment {
        let x = (0..len)
            .map(|i| {
                let t = i as f64 / 44100.0;
                0.5 * (std::f64::consts::TAU * 220.0 * t).sin() + 0.2 * (std::f64::consts::TAU * 1830.0 * t).sin()
            })
            .collect();
        AudioSegment::new(x, 44100).unwrap()
    }

    #[test]
    fn empty_chain_is_identity() {
        let s = speechish(5000);
        let chain = DistortionChain::new(vec![], 1).unwrap();
        let (y, p) = chain.compose(&s, 3).unwrap();
        assert_eq!(y, s);
        assert!(p.is_empty());
    }

    #[test]
    fn degenerate_clip_range() {
        let s = speechish(5000);
        let chain = DistortionChain::clip_preset(0.1, 9).unwrap();
        let (y, p) = chain.compose(&s, 0).unwrap();
        assert_eq!(y, apply_clip(&s, 0.1).unwrap());
        assert_eq!(p, vec![AppliedDistortion::Clip { eta: 0.1 }]);
    }

    #[test]
    fn replay_and_item_variation() {
        let s = speechish(22050);
        let chain = DistortionChain::default_chain(77);
        let (a, pa) = chain.compose(&s, 5).unwrap();
        let (b, pb) = chain.compose(&s, 5).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(pa, pb);
        let (_, pc) = chain.compose(&s, 6).unwrap();
        assert_ne!(pa, pc);
        assert_eq!(a.len(), s.len());
        assert_eq!(a.sample_rate(), 44100);
        let kinds: Vec<&str> = pa
            .iter()
            .map(|p| match p {
                AppliedDistortion::Reverb { .. } => "reverb",
                AppliedDistortion::Noise { .. } => "noise",
                AppliedDistortion::Clip { .. } => "clip",
                AppliedDistortion::LowBandwidth { .. } => "low_bandwidth",
            })
            .collect();
        assert_eq!(kinds, ["reverb", "noise", "clip", "low_bandwidth"]);
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(DistortionChain::clip_preset(1.5, 0).is_err());
        let spec = DistortionSpec::LowBandwidth {
            cutoff_hz: Range(500.0, 4000.0),
            filters: default_filters(),
            restore_rate: true,
        };
        assert!(DistortionChain::new(vec![spec], 0).is_err());
        let spec = DistortionSpec::Noise {
            snr_db: Range(10.0, 0.0),
            source: NoiseSource::default(),
        };
        assert!(DistortionChain::new(vec![spec], 0).is_err());
        let spec = DistortionSpec::Reverb {
            source: RirSource::Bank { dir: "nowhere".into() },
            wet: unit_range(),
        };
        assert!(DistortionChain::new(vec![spec], 0).is_err());
    }

    #[test]
    fn json_schema_roundtrip() {
        let chain = DistortionChain::default_chain(3);
        let text = serde_json::to_string(&chain).unwrap();
        let back: DistortionChain = serde_json::from_str(&text).unwrap();
        assert_eq!(back, chain);
        let minimal: DistortionChain = serde_json::from_str(
            r#"{"master_seed": 1, "specs": [{"kind": "clip", "eta": [0.25, 0.25]},
                {"kind": "low_bandwidth", "cutoff_hz": [2000, 4000]}]}"#,
        )
        .unwrap();
        minimal.validate().unwrap();
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::wav::WavFormat;
use crate::degrade::{DistortionChain, DistortionSpec, NoiseSource, RirSource};
use crate::error::{Error, Result};
use crate::metrics::MetricSet;
use crate::nn::{MaskNetConfig, TrainConfig};
use crate::restore::{AnalysisConfig, Estimator, SynthesisConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Where clean speech comes from and how it is cut into items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// WAV directory; synthetic speech when absent.
    pub clean_dir: Option<PathBuf>,
    /// Number of synthetic utterances, or a cap on segments taken from
    /// `clean_dir` (0 = no cap there).
    pub utterances: usize,
    pub segment_seconds: f64,
    /// A segment is kept when its RMS is at least this fraction of the RMS
    /// of the file it was cut from.
    pub energy_gate: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            clean_dir: None,
            utterances: 100,
            segment_seconds: 3.0,
            energy_gate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RirBankConfig {
    pub count: usize,
}

impl Default for RirBankConfig {
    fn default() -> Self {
        Self { count: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestoreConfig {
    /// A manifest CSV, a WAV directory or a single WAV. Defaults to the
    /// run's own manifest.
    pub input: Option<PathBuf>,
}

/// Which audio is scored against the clean references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    #[default]
    Restored,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub manifest: Option<PathBuf>,
    pub restored_dir: Option<PathBuf>,
    pub estimate: EstimateSource,
    pub metrics: MetricSet,
}

/// Everything a command needs, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub distortions: Vec<DistortionSpec>,
    pub analysis: AnalysisConfig,
    pub synthesis: SynthesisConfig,
    pub model: MaskNetConfig,
    pub training: TrainConfig,
    pub corpus: CorpusConfig,
    pub rir_bank: RirBankConfig,
    pub restore: RestoreConfig,
    pub evaluate: EvaluateConfig,
    /// Root of hash-scoped run directories. Not part of the hash.
    pub output_dir: PathBuf,
    pub wav_format: WavFormat,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            distortions: DistortionChain::default_chain(0).specs,
            analysis: AnalysisConfig::default(),
            synthesis: SynthesisConfig::default(),
            model: MaskNetConfig::default(),
            training: TrainConfig::default(),
            corpus: CorpusConfig::default(),
            rir_bank: RirBankConfig::default(),
            restore: RestoreConfig::default(),
            evaluate: EvaluateConfig::default(),
            output_dir: PathBuf::from("out"),
            wav_format: WavFormat::Float32,
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: Error| Error::Config(e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for spec in &self.distortions {
            spec.validate().map_err(bad)?;
        }
        self.analysis.validate().map_err(bad)?;
        self.synthesis.validate().map_err(bad)?;
        self.model.validate().map_err(bad)?;
        self.training.validate().map_err(bad)?;
        if self.model.num_mels != self.analysis.num_mels {
            return Err(Error::Config(format!(
                "model.num_mels {} differs from analysis.num_mels {}",
                self.model.num_mels, self.analysis.num_mels
            )));
        }
        let c = &self.corpus;
        if !(c.segment_seconds > 0.0 && c.segment_seconds.is_finite()) {
            return Err(Error::Config("corpus.segment_seconds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&c.energy_gate) {
            return Err(Error::Config("corpus.energy_gate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, with `output_dir` left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    /// `output_dir/<first 16 hex digits of the hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir).join(&self.hash()[..16])
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The distortion chain seeded by the run seed, with bank directories
    /// resolved against the config location.
    pub fn chain_specs(&self) -> Vec<DistortionSpec> {
        self.distortions
            .iter()
            .cloned()
            .map(|mut spec| {
                match &mut spec {
                    DistortionSpec::Reverb {
                        source: RirSource::Bank { dir },
                        ..
                    }
                    | DistortionSpec::Noise {
                        source: NoiseSource::Bank { dir },
                        ..
                    } => *dir = self.resolve(dir),
                    _ => {}
                }
                spec
            })
            .collect()
    }

    /// Analysis settings with a trained checkpoint path made absolute, or
    /// pointed at this run's final checkpoint when left empty.
    pub fn resolved_analysis(&self) -> AnalysisConfig {
        let mut a = self.analysis.clone();
        if let Estimator::Trained { checkpoint } = &mut a.estimator {
            *checkpoint = if checkpoint.as_os_str().is_empty() {
                self.run_dir().join("checkpoints").join("final.json")
            } else {
                self.resolve(checkpoint)
            };
        }
        a
    }
}

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::speech::synth_utterance;
use super::wav::read_wav;
use crate::degrade::item_seed;
use crate::dsp::{resample, rms, AudioSegment};
use crate::error::{Error, Result};
use crate::MODEL_SAMPLE_RATE;

/// Keeps synthetic speech seeds apart from distortion seeds.
const SPEECH_SALT: u64 = 0x5EEC_4C0A_F0E5_0001;

/// A clean item ready for simulation.
#[derive(Debug, Clone)]
pub struct CleanItem {
    pub id: String,
    pub audio: AudioSegment,
}

/// Sorted `.wav` files directly inside `dir`.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

pub fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Non-overlapping windows of `seg_len` samples whose RMS reaches `gate`
/// times the RMS of the whole signal. A short tail is dropped.
pub fn segment(audio: &AudioSegment, seg_len: usize, gate: f64) -> Result<Vec<AudioSegment>> {
    if seg_len == 0 {
        return Err(Error::Config("segment length must be positive".into()));
    }
    let whole = rms(audio.samples());
    audio
        .samples()
        .chunks_exact(seg_len)
        .filter(|c| whole > 0.0 && rms(c) >= gate * whole)
        .map(|c| audio.with_samples(c.to_vec()))
        .collect()
}

pub fn segment_len(cfg: &RunConfig) -> usize {
    (cfg.corpus.segment_seconds * MODEL_SAMPLE_RATE as f64).round() as usize
}

/// Clean items for a run: segments of the configured directory, or
/// synthetic utterances when none is given.
pub fn load_clean(cfg: &RunConfig) -> Result<Vec<CleanItem>> {
    let c = &cfg.corpus;
    let seg_len = segment_len(cfg);
    let Some(dir) = &c.clean_dir else {
        return (0..c.utterances)
            .map(|i| {
                let seed = item_seed(cfg.seed ^ SPEECH_SALT, i as u64);
                Ok(CleanItem {
                    id: format!("utt_{i:04}"),
                    audio: synth_utterance(seg_len, MODEL_SAMPLE_RATE, seed)?,
                })
            })
            .collect();
    };
    let dir = cfg.resolve(dir);
    let files = list_wavs(&dir).map_err(|e| Error::Config(format!("clean_dir {}: {e}", dir.display())))?;
    if files.is_empty() {
        return Err(Error::Config(format!("clean_dir {} holds no WAV files", dir.display())));
    }
    let mut items = Vec::new();
    for f in files {
        let audio = resample(&read_wav(&f)?, MODEL_SAMPLE_RATE)?;
        let stem = file_stem(&f);
        for (k, seg) in segment(&audio, seg_len, c.energy_gate)?.into_iter().enumerate() {
            items.push(CleanItem {
                id: format!("{stem}_{k:03}"),
                audio: seg,
            });
            if c.utterances > 0 && items.len() == c.utterances {
                return Ok(items);
            }
        }
    }
    Ok(items)
}

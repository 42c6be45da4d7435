use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::dsp::AudioSegment;
use crate::error::{Error, Result};

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

fn wav_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Wav(format!("{}: {msg}", path.display()))
}

/// Walks the RIFF chunk list and reports the first structural problem, so a
/// decoder failure can name the chunk that is missing or cut short.
fn diagnose(bytes: &[u8]) -> String {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return "missing or truncated RIFF header".into();
    }
    if &bytes[8..12] != b"WAVE" {
        return "RIFF form type is not WAVE".into();
    }
    let mut pos = 12;
    let mut seen_fmt = false;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(id).trim().to_string();
        let body = pos + 8;
        if body + size > bytes.len() {
            return format!("truncated {name} chunk: declares {size} bytes, {} present", bytes.len() - body);
        }
        match id {
            b"fmt " => seen_fmt = true,
            b"data" if !seen_fmt => return "missing fmt chunk before data".into(),
            b"data" => return "unsupported or malformed fmt chunk".into(),
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    if !seen_fmt {
        "missing fmt chunk".into()
    } else {
        "missing data chunk".into()
    }
}

/// Reads PCM16 or float32 WAV (plain or extensible), downmixing to mono by
/// averaging channels. 16-bit values are divided by 32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSegment> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| wav_err(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| wav_err(path, e))?;
    let reader = WavReader::new(bytes.as_slice()).map_err(|e| wav_err(path, format!("{} ({e})", diagnose(&bytes))))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(wav_err(path, format!("unsupported channel count {channels}")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => return Err(wav_err(path, format!("unsupported codec: {fmt:?} {bits}-bit"))),
    }
    .map_err(|e| wav_err(path, format!("{} ({e})", diagnose(&bytes))))?;
    if interleaved.len() % channels != 0 {
        return Err(wav_err(path, "truncated data chunk: partial frame"));
    }
    let samples = interleaved
        .chunks_exact(channels)
        .map(|f| f.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioSegment::new(samples, spec.sample_rate)
}

/// Quantizes one sample to 16 bits: clamp to [-1, 1], scale, round half away
/// from zero, saturate at the positive end.
pub fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioSegment, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &x in audio.samples() {
        match format {
            WavFormat::Pcm16 => w.write_sample(to_pcm16(x)),
            WavFormat::Float32 => w.write_sample(x as f32),
        }
        .map_err(|e| wav_err(path, e))?;
    }
    w.finalize().map_err(|e| wav_err(path, e))
}

//! Python bindings: audio I/O, degradation, restoration, metrics and the
//! command workflows. Audio crosses the boundary as lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use speechfix::degrade::{self, DistortionChain, DistortionSpec, RoomSpec};
use speechfix::harness::{self, RunConfig, WavFormat};
use speechfix::restore::{AnalysisConfig, Restorer as CoreRestorer, SynthesisConfig};
use speechfix::{dsp, metrics, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Wav(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type Rows = Vec<Vec<f64>>;

fn rows(a: &ndarray::Array2<f64>) -> Rows {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Mono audio at a fixed sample rate.
#[pyclass(name = "AudioSegment", from_py_object)]
#[derive(Clone)]
struct PyAudio {
    inner: dsp::AudioSegment,
}

#[pymethods]
impl PyAudio {
    #[new]
    fn new(samples: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        Ok(Self {
            inner: dsp::AudioSegment::new(samples, sample_rate).map_err(py_err)?,
        })
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate()
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("AudioSegment({} samples @ {} Hz)", self.inner.len(), self.inner.sample_rate())
    }
}

fn wrap(inner: dsp::AudioSegment) -> PyAudio {
    PyAudio { inner }
}

#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<PyAudio> {
    harness::read_wav(path).map(wrap).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (path, audio, format = "pcm16"))]
fn write_wav(path: PathBuf, audio: &PyAudio, format: &str) -> PyResult<()> {
    let format: WavFormat = serde_json::from_value(serde_json::Value::String(format.into())).map_err(json_err)?;
    harness::write_wav(path, &audio.inner, format).map_err(py_err)
}

/// Speech-like test signal, peak-normalized.
#[pyfunction]
fn synth_utterance(length: usize, sample_rate: u32, seed: u64) -> PyResult<PyAudio> {
    harness::synth_utterance(length, sample_rate, seed).map(wrap).map_err(py_err)
}

/// |STFT| as frames x bins.
#[pyfunction]
fn stft_magnitude(audio: &PyAudio, fft_size: usize, hop: usize) -> PyResult<Rows> {
    Ok(rows(&dsp::stft(&audio.inner, fft_size, hop).map_err(py_err)?.magnitude()))
}

/// Mel magnitude spectrogram as frames x mels.
#[pyfunction]
#[pyo3(signature = (audio, fft_size = 2048, hop = 441, num_mels = 128))]
fn mel_spectrogram(audio: &PyAudio, fft_size: usize, hop: usize, num_mels: usize) -> PyResult<Rows> {
    let fb = dsp::build_mel_filterbank(audio.inner.sample_rate(), fft_size, num_mels).map_err(py_err)?;
    let mag = dsp::stft(&audio.inner, fft_size, hop).map_err(py_err)?.magnitude();
    Ok(rows(&dsp::apply_mel(mag.view(), &fb, hop).map_err(py_err)?.frames))
}

#[pyfunction]
fn apply_clip(audio: &PyAudio, eta: f64) -> PyResult<PyAudio> {
    degrade::apply_clip(&audio.inner, eta).map(wrap).map_err(py_err)
}

#[pyfunction]
fn apply_noise(speech: &PyAudio, noise: &PyAudio, snr_db: f64) -> PyResult<PyAudio> {
    degrade::apply_noise(&speech.inner, &noise.inner, snr_db).map(wrap).map_err(py_err)
}

/// Seeded distortion chain built from a JSON list of specs.
#[pyclass(name = "DistortionChain")]
struct PyChain {
    inner: DistortionChain,
}

#[pymethods]
impl PyChain {
    #[new]
    #[pyo3(signature = (specs_json, seed = 0))]
    fn new(specs_json: &str, seed: u64) -> PyResult<Self> {
        let specs: Vec<DistortionSpec> = serde_json::from_str(specs_json).map_err(json_err)?;
        Ok(Self {
            inner: DistortionChain::new(specs, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn default(seed: u64) -> Self {
        Self {
            inner: DistortionChain::default_chain(seed),
        }
    }

    /// Returns the degraded audio and the drawn parameters as JSON.
    fn compose(&self, audio: &PyAudio, item_index: u64) -> PyResult<(PyAudio, String)> {
        let (y, params) = self.inner.compose(&audio.inner, item_index).map_err(py_err)?;
        Ok((wrap(y), serde_json::to_string(&params).map_err(json_err)?))
    }
}

/// A random feasible room as JSON.
#[pyfunction]
fn sample_room(seed: u64) -> PyResult<String> {
    serde_json::to_string(&degrade::sample_room(seed)).map_err(json_err)
}

#[pyfunction]
#[pyo3(signature = (room_json, sample_rate = 44100, seed = 0))]
fn simulate_rir(room_json: &str, sample_rate: u32, seed: u64) -> PyResult<Vec<f64>> {
    let room: RoomSpec = serde_json::from_str(room_json).map_err(json_err)?;
    degrade::simulate_rir(&room, sample_rate, seed).map_err(py_err)
}

#[pyfunction]
fn schroeder_rt60(rir: Vec<f64>, sample_rate: u32) -> Option<f64> {
    degrade::schroeder_rt60(&rir, sample_rate)
}

/// Analysis and synthesis configured from JSON documents.
#[pyclass(name = "Restorer")]
struct PyRestorer {
    inner: CoreRestorer,
}

#[pymethods]
impl PyRestorer {
    #[new]
    #[pyo3(signature = (analysis_json = "{}", synthesis_json = "{}"))]
    fn new(analysis_json: &str, synthesis_json: &str) -> PyResult<Self> {
        let a: AnalysisConfig = serde_json::from_str(analysis_json).map_err(json_err)?;
        let s: SynthesisConfig = serde_json::from_str(synthesis_json).map_err(json_err)?;
        Ok(Self {
            inner: CoreRestorer::new(a, s).map_err(py_err)?,
        })
    }

    #[getter]
    fn estimator(&self) -> &'static str {
        self.inner.analysis.estimator.label()
    }

    /// Restored mel spectrogram (frames x mels).
    #[pyo3(signature = (audio, target = None))]
    fn analyze(&self, audio: &PyAudio, target: Option<PyAudio>) -> PyResult<Rows> {
        let mel = self.inner.analyze(&audio.inner, target.as_ref().map(|t| &t.inner)).map_err(py_err)?;
        Ok(rows(&mel.frames))
    }

    #[pyo3(signature = (audio, target = None))]
    fn restore(&self, py: Python<'_>, audio: &PyAudio, target: Option<PyAudio>) -> PyResult<PyAudio> {
        let x = audio.inner.clone();
        let t = target.map(|t| t.inner);
        py.detach(|| self.inner.restore(&x, t.as_ref())).map(wrap).map_err(py_err)
    }
}

#[pyfunction]
fn lsd(reference: &PyAudio, estimate: &PyAudio) -> PyResult<f64> {
    metrics::lsd(&reference.inner, &estimate.inner).map_err(py_err)
}

#[pyfunction]
fn ssim(reference: &PyAudio, estimate: &PyAudio) -> PyResult<f64> {
    metrics::ssim_spec(&reference.inner, &estimate.inner).map_err(py_err)
}

#[pyfunction]
fn stoi(reference: &PyAudio, estimate: &PyAudio) -> PyResult<f64> {
    metrics::stoi(&reference.inner, &estimate.inner).map_err(py_err)
}

#[pyfunction]
fn si_sdr(reference: &PyAudio, estimate: &PyAudio) -> PyResult<f64> {
    metrics::si_sdr(&reference.inner, &estimate.inner).map_err(py_err)
}

/// SHA-256 of a run configuration document.
#[pyfunction]
fn config_hash(config_json: &str) -> PyResult<String> {
    Ok(RunConfig::from_json(config_json, ".").map_err(py_err)?.hash())
}

/// Runs `simulate`, `rir-gen`, `train`, `restore` or `evaluate`; returns
/// `(exit_code, artifact paths, failures)`.
#[pyfunction]
#[pyo3(signature = (command, config_path, seed = None, out = None))]
fn run_command(
    py: Python<'_>,
    command: &str,
    config_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> PyResult<(i32, Vec<PathBuf>, Vec<(String, String)>)> {
    let mut cfg = RunConfig::load(&config_path).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = std::env::current_dir()?.join(o);
    }
    match py.detach(|| harness::run_command(command, &cfg)) {
        Ok(o) => Ok((
            o.exit_code(),
            o.artifacts.clone(),
            o.failures.into_iter().map(|f| (f.id, f.error)).collect(),
        )),
        Err(e) => Ok((harness::error_exit_code(&e), vec![], vec![(String::new(), e.to_string())])),
    }
}

#[pymodule]
fn speechfix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAudio>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyRestorer>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(synth_utterance, m)?)?;
    m.add_function(wrap_pyfunction!(stft_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(mel_spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(apply_clip, m)?)?;
    m.add_function(wrap_pyfunction!(apply_noise, m)?)?;
    m.add_function(wrap_pyfunction!(sample_room, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_rir, m)?)?;
    m.add_function(wrap_pyfunction!(schroeder_rt60, m)?)?;
    m.add_function(wrap_pyfunction!(lsd, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(stoi, m)?)?;
    m.add_function(wrap_pyfunction!(si_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}

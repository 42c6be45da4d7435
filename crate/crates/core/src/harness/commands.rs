use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{EstimateSource, RunConfig};
use super::corpus::{file_stem, list_wavs, load_clean, CleanItem};
use super::manifest::{manifest_path, relative_to, CorpusManifest, ManifestRow};
use super::wav::{read_wav, write_wav, WavFormat};
use crate::degrade::{
    item_seed, sample_room, schroeder_rt60, simulate_rir, DistortionChain, DistortionSpec, NoiseSource,
    ResourceBanks, RirSource, RoomSpec,
};
use crate::dsp::resample;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_corpus, Failure, ReportMeta};
use crate::nn::{save_checkpoint, train, MaskNet, TrainPair};
use crate::restore::{Estimator, Restorer};
use crate::MODEL_SAMPLE_RATE;

/// Result of one command: where it wrote, and which items failed.
#[derive(Debug, Clone, Default)]
pub struct CommandOutcome {
    pub run_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

impl CommandOutcome {
    /// 0 when every item succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failures.is_empty())
    }
}

/// Exit code for an error that aborted a command.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InfeasibleRt60 { .. } => 2,
        _ => 1,
    }
}

fn fail(id: &str, e: Error) -> Failure {
    Failure {
        id: id.to_string(),
        error: e.to_string(),
    }
}

fn split<T>(results: Vec<std::result::Result<T, Failure>>) -> (Vec<T>, Vec<Failure>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(f) => bad.push(f),
        }
    }
    (ok, bad)
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

fn load_bank(dir: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let files = list_wavs(dir).map_err(|e| Error::Config(format!("bank {}: {e}", dir.display())))?;
    files
        .iter()
        .map(|f| Ok((file_stem(f), resample(&read_wav(f)?, MODEL_SAMPLE_RATE)?.into_samples())))
        .collect()
}

/// The run's distortion chain with any recorded banks loaded.
pub fn build_chain(cfg: &RunConfig) -> Result<DistortionChain> {
    let specs = cfg.chain_specs();
    let mut banks = ResourceBanks::default();
    for spec in &specs {
        match spec {
            DistortionSpec::Reverb {
                source: RirSource::Bank { dir },
                ..
            } => banks.rirs.extend(load_bank(dir)?),
            DistortionSpec::Noise {
                source: NoiseSource::Bank { dir },
                ..
            } => banks.noise.extend(load_bank(dir)?),
            _ => {}
        }
    }
    let chain = DistortionChain {
        specs,
        master_seed: cfg.seed,
        banks: Arc::new(banks),
    };
    chain.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(chain)
}

/// Degrades the clean corpus and writes `clean/`, `degraded/` and
/// `manifest.csv` under the run directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutcome> {
    let items = load_clean(cfg)?;
    let chain = build_chain(cfg)?;
    let run = cfg.run_dir();
    let (clean_dir, degraded_dir) = (run.join("clean"), run.join("degraded"));
    create_dir(&clean_dir)?;
    create_dir(&degraded_dir)?;
    let hash = cfg.hash();
    let results: Vec<_> = items
        .par_iter()
        .enumerate()
        .map(|(i, CleanItem { id, audio })| {
            let job = || -> Result<ManifestRow> {
                let (degraded, applied) = chain.compose(audio, i as u64)?;
                let clean_path = clean_dir.join(format!("{id}.wav"));
                let degraded_path = degraded_dir.join(format!("{id}.wav"));
                write_wav(&clean_path, audio, cfg.wav_format)?;
                write_wav(&degraded_path, &degraded, cfg.wav_format)?;
                Ok(ManifestRow {
                    item_id: id.clone(),
                    clean_path: relative_to(&clean_path, &run)?,
                    degraded_path: relative_to(&degraded_path, &run)?,
                    applied_params: serde_json::to_string(&applied)?,
                    duration_s: degraded.duration_s(),
                    sample_rate: degraded.sample_rate(),
                    config_hash: hash.clone(),
                })
            };
            job().map_err(|e| fail(id, e))
        })
        .collect();
    let (rows, failures) = split(results);
    let manifest = run.join("manifest.csv");
    CorpusManifest::new(rows)?.write(&manifest)?;
    Ok(CommandOutcome {
        run_dir: run,
        artifacts: vec![manifest],
        failures,
    })
}

#[derive(Serialize)]
struct RirEntry {
    id: String,
    file: String,
    room_seed: u64,
    room: RoomSpec,
    rt60_measured: Option<f64>,
}

#[derive(Serialize)]
struct RirMetadata {
    config_hash: String,
    seed: u64,
    sample_rate: u32,
    count: usize,
    rirs: Vec<RirEntry>,
}

/// Writes `rir_bank.count` simulated RIRs plus `metadata.json` to `rirs/`.
/// RIRs are always stored as float32.
pub fn cmd_rir_gen(cfg: &RunConfig) -> Result<CommandOutcome> {
    let run = cfg.run_dir();
    let dir = run.join("rirs");
    create_dir(&dir)?;
    let results: Vec<_> = (0..cfg.rir_bank.count)
        .into_par_iter()
        .map(|i| {
            let id = format!("rir_{i:04}");
            let job = || -> Result<RirEntry> {
                let room_seed = item_seed(cfg.seed, i as u64);
                let room = sample_room(room_seed);
                let rir = simulate_rir(&room, MODEL_SAMPLE_RATE, room_seed)?;
                let file = format!("{id}.wav");
                let audio = crate::dsp::AudioSegment::new(rir, MODEL_SAMPLE_RATE)?;
                write_wav(dir.join(&file), &audio, WavFormat::Float32)?;
                Ok(RirEntry {
                    rt60_measured: schroeder_rt60(audio.samples(), MODEL_SAMPLE_RATE),
                    id: id.clone(),
                    file,
                    room_seed,
                    room,
                })
            };
            job().map_err(|e| fail(&id, e))
        })
        .collect();
    let (rirs, failures) = split(results);
    let meta = RirMetadata {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        sample_rate: MODEL_SAMPLE_RATE,
        count: rirs.len(),
        rirs,
    };
    let path = dir.join("metadata.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(CommandOutcome {
        run_dir: run,
        artifacts: vec![path],
        failures,
    })
}

/// Mel-domain training pairs simulated from the clean corpus.
pub fn training_pairs(cfg: &RunConfig) -> Result<Vec<TrainPair>> {
    let items = load_clean(cfg)?;
    let chain = build_chain(cfg)?;
    let mut analysis = cfg.analysis.clone();
    analysis.estimator = Estimator::Identity;
    let restorer = Restorer::new(analysis, cfg.synthesis.clone())?;
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let (degraded, _) = chain.compose(&item.audio, i as u64)?;
            Ok(TrainPair {
                degraded: restorer.mel(&degraded)?.frames,
                clean: restorer.mel(&item.audio)?.frames,
            })
        })
        .collect()
}

/// Trains the mask network; writes `checkpoints/step_NNNNNN.json`,
/// `checkpoints/final.json` and `loss.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<CommandOutcome> {
    let pairs = training_pairs(cfg)?;
    let run = cfg.run_dir();
    let ck_dir = run.join("checkpoints");
    create_dir(&ck_dir)?;
    let hash = cfg.hash();
    let mut net = MaskNet::new(cfg.model.clone())?;
    let mut artifacts = Vec::new();
    let steps = cfg.training.steps;
    let outcome = train(&mut net, &pairs, &cfg.training, |step, net| {
        let name = if step == steps { "final.json".to_string() } else { format!("step_{step:06}.json") };
        let p = ck_dir.join(name);
        save_checkpoint(&p, net, &hash, step)?;
        artifacts.push(p);
        Ok(())
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loss", "learning_rate", "config_hash"])?;
    for (i, (loss, lr)) in outcome.losses.iter().zip(&outcome.learning_rates).enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string(), lr.to_string(), hash.clone()])?;
    }
    let loss_path = run.join("loss.csv");
    std::fs::write(&loss_path, w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    artifacts.push(loss_path);
    Ok(CommandOutcome {
        run_dir: run,
        artifacts,
        failures: Vec::new(),
    })
}

struct RestoreJob {
    id: String,
    input: PathBuf,
    target: Option<PathBuf>,
}

fn restore_jobs(input: &Path) -> Result<Vec<RestoreJob>> {
    if input.is_dir() {
        return Ok(list_wavs(input)?
            .into_iter()
            .map(|p| RestoreJob {
                id: file_stem(&p),
                input: p,
                target: None,
            })
            .collect());
    }
    if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let m = CorpusManifest::read(input)?;
        return Ok(m
            .rows
            .into_iter()
            .map(|r| RestoreJob {
                input: manifest_path(input, &r.degraded_path),
                target: Some(manifest_path(input, &r.clean_path)),
                id: r.item_id,
            })
            .collect());
    }
    if input.is_file() {
        return Ok(vec![RestoreJob {
            id: file_stem(input),
            input: input.to_path_buf(),
            target: None,
        }]);
    }
    Err(Error::Config(format!("restore input {} does not exist", input.display())))
}

/// Restores every input into `restored/<id>_<mode>.wav`.
pub fn cmd_restore(cfg: &RunConfig) -> Result<CommandOutcome> {
    let run = cfg.run_dir();
    let input = match &cfg.restore.input {
        Some(p) => cfg.resolve(p),
        None => run.join("manifest.csv"),
    };
    let jobs = restore_jobs(&input)?;
    let restorer = Restorer::new(cfg.resolved_analysis(), cfg.synthesis.clone())?;
    let label = cfg.analysis.estimator.label();
    let oracle = matches!(cfg.analysis.estimator, Estimator::Oracle);
    let out_dir = run.join("restored");
    create_dir(&out_dir)?;
    let results: Vec<_> = jobs
        .par_iter()
        .map(|job| {
            let run_one = || -> Result<PathBuf> {
                let x = read_wav(&job.input)?;
                let target = match (&job.target, oracle) {
                    (Some(t), true) => Some(read_wav(t)?),
                    _ => None,
                };
                let y = restorer.restore(&x, target.as_ref())?;
                let p = out_dir.join(format!("{}_{label}.wav", job.id));
                write_wav(&p, &y, cfg.wav_format)?;
                Ok(p)
            };
            run_one().map_err(|e| fail(&job.id, e))
        })
        .collect();
    let (artifacts, failures) = split(results);
    Ok(CommandOutcome {
        run_dir: run,
        artifacts,
        failures,
    })
}

/// Scores restored (or unprocessed) audio against the manifest's clean
/// references; writes `report_<label>.json` and `.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<CommandOutcome> {
    let run = cfg.run_dir();
    let manifest_file = match &cfg.evaluate.manifest {
        Some(p) => cfg.resolve(p),
        None => run.join("manifest.csv"),
    };
    let manifest = CorpusManifest::read(&manifest_file)
        .map_err(|e| Error::Config(format!("manifest {}: {e}", manifest_file.display())))?;
    let restored_dir = match &cfg.evaluate.restored_dir {
        Some(p) => cfg.resolve(p),
        None => run.join("restored"),
    };
    let label = match cfg.evaluate.estimate {
        EstimateSource::Degraded => "unprocessed",
        EstimateSource::Restored => cfg.analysis.estimator.label(),
    };
    let items: Vec<_> = manifest
        .rows
        .iter()
        .map(|r| crate::metrics::EvalItem {
            id: r.item_id.clone(),
            reference: manifest_path(&manifest_file, &r.clean_path),
            estimate: match cfg.evaluate.estimate {
                EstimateSource::Degraded => manifest_path(&manifest_file, &r.degraded_path),
                EstimateSource::Restored => restored_dir.join(format!("{}_{label}.wav", r.item_id)),
            },
        })
        .collect();
    let manifest_bytes = std::fs::read(&manifest_file)?;
    let meta = ReportMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        corpus_id: hex::encode(&Sha256::digest(&manifest_bytes)[..8]),
        reference: "clean".into(),
        estimate: label.into(),
    };
    let report = evaluate_corpus(&items, &cfg.evaluate.metrics, meta);
    create_dir(&run)?;
    let json = run.join(format!("report_{label}.json"));
    let csv = run.join(format!("report_{label}.csv"));
    report.write(&json, &csv)?;
    Ok(CommandOutcome {
        run_dir: run,
        artifacts: vec![json, csv],
        failures: report.failures,
    })
}

/// Thread pool bounded by `SPEECHFIX_WORKERS` when set.
pub fn worker_pool(workers: Option<&str>) -> Result<rayon::ThreadPool> {
    let n = match workers {
        None => 0,
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(Error::Config(format!("SPEECHFIX_WORKERS must be a positive integer, got {s:?}"))),
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Dispatches a command by its CLI name.
pub fn run_command(name: &str, cfg: &RunConfig) -> Result<CommandOutcome> {
    match name {
        "simulate" => cmd_simulate(cfg),
        "rir-gen" => cmd_rir_gen(cfg),
        "train" => cmd_train(cfg),
        "restore" => cmd_restore(cfg),
        "evaluate" => cmd_evaluate(cfg),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}

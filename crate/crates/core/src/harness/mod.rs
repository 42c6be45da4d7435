//! File I/O, configuration, corpus manifests and the command workflows.

mod commands;
mod config;
mod corpus;
mod manifest;
mod speech;
mod wav;

pub use commands::{
    build_chain, cmd_evaluate, cmd_restore, cmd_rir_gen, cmd_simulate, cmd_train, error_exit_code, run_command,
    training_pairs, worker_pool, CommandOutcome,
};
pub use config::{
    CorpusConfig, EstimateSource, EvaluateConfig, RestoreConfig, RirBankConfig, RunConfig, SCHEMA_VERSION,
};
pub use corpus::{list_wavs, load_clean, segment, CleanItem};
pub use manifest::{manifest_path, CorpusManifest, ManifestRow};
pub use speech::synth_utterance;
pub use wav::{read_wav, to_pcm16, write_wav, WavFormat};

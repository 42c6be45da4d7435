//! The distortion set, its seeded composition, and an image-source RIR
//! simulator.

mod chain;
mod noise;
mod ops;
pub mod rir;

pub use chain::{
    item_seed, AppliedDistortion, AppliedParams, DistortionChain, DistortionSpec, NoiseSource, Range,
    ResourceBanks, RirSource,
};
pub use noise::{synth_noise, NoiseColor};
pub use ops::{
    apply_clip, apply_low_bandwidth, apply_noise, apply_reverb, apply_reverb_wet, fit_noise, noise_gain,
    normalize_rir,
};
pub use rir::{covering_order, sample_room, schroeder_rt60, simulate_rir, simulate_rir_with_absorption, RoomSpec};

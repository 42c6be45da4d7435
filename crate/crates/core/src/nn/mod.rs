//! Reverse-mode autograd and the mel mask estimator.

mod adam;
mod checkpoint;
mod graph;
mod masknet;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ParamBlob, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use graph::{Graph, ParamId, ParamStore, Var};
pub use masknet::{
    apply_mask, from_net_output, mae_loss, restore_mel, to_net_input, MaskNet, MaskNetConfig, Mode, RunningStats,
    BN_EPS, BN_MOMENTUM, LEAKY_SLOPE,
};
pub use train::{batch_loss, train, TrainConfig, TrainOutcome, TrainPair};

use std::fs;
use std::path::Path;

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use super::masknet::{MaskNet, MaskNetConfig, RunningStats};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "speechfix-masknet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlob {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON checkpoint: architecture, parameters, normalization statistics and
/// the hash of the run configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub step: usize,
    pub architecture: MaskNetConfig,
    pub params: Vec<ParamBlob>,
    pub running: Vec<RunningStats>,
}

impl Checkpoint {
    pub fn from_net(net: &MaskNet, config_hash: &str, step: usize) -> Self {
        let params = net
            .params
            .ids()
            .map(|id| {
                let v = net.params.value(id);
                ParamBlob {
                    name: net.params.name(id).to_string(),
                    shape: v.shape().to_vec(),
                    values: v.iter().cloned().collect(),
                }
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.into(),
            step,
            architecture: net.config.clone(),
            params,
            running: net.running.clone(),
        }
    }

    pub fn to_net(&self) -> Result<MaskNet> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut net = MaskNet::new(self.architecture.clone())?;
        if self.params.len() != net.params.len() || self.running.len() != net.running.len() {
            return Err(Error::Checkpoint("parameter count does not match architecture".into()));
        }
        let ids: Vec<_> = net.params.ids().collect();
        for (id, blob) in ids.into_iter().zip(&self.params) {
            let expected = net.params.value(id).shape().to_vec();
            if blob.name != net.params.name(id) || blob.shape != expected {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    blob.name,
                    blob.shape,
                    net.params.name(id),
                    expected
                )));
            }
            let shape = (blob.shape[0], blob.shape[1], blob.shape[2], blob.shape[3]);
            *net.params.value_mut(id) = Array4::from_shape_vec(shape, blob.values.clone())
                .map_err(|e| Error::Checkpoint(format!("{}: {e}", blob.name)))?;
        }
        for (dst, src) in net.running.iter_mut().zip(&self.running) {
            if dst.mean.len() != src.mean.len() || dst.var.len() != src.var.len() {
                return Err(Error::Checkpoint("running statistics do not match architecture".into()));
            }
            *dst = src.clone();
        }
        Ok(net)
    }
}

pub fn save_checkpoint(path: &Path, net: &MaskNet, config_hash: &str, step: usize) -> Result<()> {
    let ckpt = Checkpoint::from_net(net, config_hash, step);
    fs::write(path, serde_json::to_vec(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(MaskNet, Checkpoint)> {
    let ckpt: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
    Ok((ckpt.to_net()?, ckpt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let net = MaskNet::new(MaskNetConfig {
            num_mels: 8,
            blocks: 2,
            base_channels: 2,
            seed: 9,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_checkpoint(&path, &net, "abc", 12).unwrap();
        let (back, meta) = load_checkpoint(&path).unwrap();
        assert_eq!(meta.step, 12);
        assert_eq!(meta.config_hash, "abc");
        assert_eq!(back.params, net.params);
        assert_eq!(back.running, net.running);
    }

    #[test]
    fn mismatched_architecture_rejected() {
        let net = MaskNet::new(MaskNetConfig::default()).unwrap();
        let mut ckpt = Checkpoint::from_net(&net, "", 0);
        ckpt.architecture.base_channels = 8;
        assert!(matches!(ckpt.to_net(), Err(Error::Checkpoint(_))));
    }
}

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::graph::Graph;
use super::masknet::{to_net_input, MaskNet, Mode};
use crate::error::{invalid, Error, Result};

/// One training example: degraded and clean mel magnitudes, frames x mels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub degraded: Array2<f64>,
    pub clean: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub warmup_steps: u64,
    pub decay_rate: f64,
    /// Hours of audio between learning-rate decays.
    pub decay_hours: f64,
    pub segment_samples: usize,
    pub sample_rate: u32,
    pub epsilon: f64,
    pub seed: u64,
    /// Checkpoint period in steps; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 4,
            learning_rate: 3e-4,
            beta1: 0.5,
            beta2: 0.999,
            warmup_steps: 1000,
            decay_rate: 0.9,
            decay_hours: 400.0,
            segment_samples: 132_300,
            sample_rate: 44_100,
            epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Steps between decays: the configured hours of audio divided by the
    /// audio consumed per step.
    pub fn decay_interval(&self) -> u64 {
        let per_step = (self.batch_size * self.segment_samples) as f64;
        let total = self.decay_hours * 3600.0 * self.sample_rate as f64;
        ((total / per_step).round() as u64).max(1)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            warmup_steps: self.warmup_steps,
            decay_rate: self.decay_rate,
            decay_interval: self.decay_interval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.segment_samples == 0 || self.sample_rate == 0 {
            return Err(invalid("batch_size, segment_samples and sample_rate must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !(self.epsilon > 0.0) {
            return Err(invalid("learning_rate must be >= 0 and epsilon > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOutcome {
    /// Batch loss before each update.
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

/// Loss of `mask(log1p X) * (X + eps)` against the clean mel, with gradients
/// accumulated into the network parameters.
pub fn batch_loss(net: &mut MaskNet, batch: &[&TrainPair], eps: f64, mode: Mode) -> Result<(Graph, f64)> {
    let degraded: Vec<&Array2<f64>> = batch.iter().map(|p| &p.degraded).collect();
    let clean: Vec<&Array2<f64>> = batch.iter().map(|p| &p.clean).collect();
    let x = to_net_input(&degraded)?;
    let mut g = Graph::new();
    let xin = g.input(x.clone())?;
    let feat = g.log1p(xin)?;
    let mask = net.forward(&mut g, feat, mode)?;
    let shifted = g.input(x.mapv(|v| v + eps))?;
    let est = g.mul(mask, shifted)?;
    let target = g.input(to_net_input(&clean)?)?;
    let loss = g.mae(est, target)?;
    let value = g.value(loss)[[0, 0, 0, 0]];
    g.backward(loss, &mut net.params)?;
    Ok((g, value))
}

/// Seeded minibatch training with MAE on the restored mel.
///
/// `on_checkpoint` runs every `checkpoint_every` steps and after the last one.
pub fn train<F>(net: &mut MaskNet, pairs: &[TrainPair], cfg: &TrainConfig, mut on_checkpoint: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, &MaskNet) -> Result<()>,
{
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(invalid("no training pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam(), &net.params);
    let mut out = TrainOutcome::default();
    for step in 1..=cfg.steps {
        let batch: Vec<&TrainPair> = (0..cfg.batch_size).map(|_| &pairs[rng.gen_range(0..pairs.len())]).collect();
        net.params.zero_grad();
        let loss = match batch_loss(net, &batch, cfg.epsilon, Mode::Train) {
            Ok((_, loss)) if loss.is_finite() => loss,
            Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::Diverged(step)),
            Err(e) => return Err(e),
        };
        out.losses.push(loss);
        out.learning_rates.push(adam.step(&mut net.params));
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps {
            on_checkpoint(step, net)?;
        }
    }
    on_checkpoint(cfg.steps, net)?;
    Ok(out)
}

use ndarray::{Array2, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, ParamId, ParamStore, Var};
use crate::dsp::MelSpectrogram;
use crate::error::{invalid, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-5;

/// Size of the mask estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskNetConfig {
    pub num_mels: usize,
    /// Encoder blocks; the decoder mirrors them.
    pub blocks: usize,
    pub base_channels: usize,
    pub seed: u64,
}

impl Default for MaskNetConfig {
    fn default() -> Self {
        Self {
            num_mels: 128,
            blocks: 3,
            base_channels: 16,
            seed: 0,
        }
    }
}

impl MaskNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.base_channels == 0 {
            return Err(invalid("mask net needs at least one block and one channel"));
        }
        if self.num_mels == 0 || self.num_mels % (1 << self.blocks) != 0 {
            return Err(invalid(format!(
                "num_mels {} must be a positive multiple of 2^{}",
                self.num_mels, self.blocks
            )));
        }
        Ok(())
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are updated.
    Train,
    /// Running statistics.
    Eval,
}

#[derive(Debug, Clone)]
struct Conv {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
    slot: usize,
}

#[derive(Debug, Clone)]
struct ResBlock {
    norm1: Norm,
    conv1: Conv,
    norm2: Norm,
    conv2: Conv,
    shortcut: Option<Conv>,
}

/// Running mean and variance of one normalization layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// UNet-style mel mask estimator: residual encoder blocks with frequency
/// pooling, a residual bottleneck, transposed-convolution decoders with
/// skip concatenation, and a softplus head.
#[derive(Debug, Clone)]
pub struct MaskNet {
    pub config: MaskNetConfig,
    pub params: ParamStore,
    pub running: Vec<RunningStats>,
    stem: Conv,
    encoders: Vec<ResBlock>,
    bottleneck: ResBlock,
    ups: Vec<Conv>,
    decoders: Vec<ResBlock>,
    head: Conv,
}

struct Builder<'a> {
    params: &'a mut ParamStore,
    running: &'a mut Vec<RunningStats>,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> Conv {
        let std = (2.0 / (cin * k * k) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let w = Array4::from_shape_fn((cout, cin, k, k), |_| normal.sample(&mut self.rng));
        Conv {
            w: self.params.add(format!("{name}.weight"), w),
            b: self.params.add(format!("{name}.bias"), Array4::zeros((1, cout, 1, 1))),
        }
    }

    fn up(&mut self, name: &str, cin: usize, cout: usize) -> Conv {
        let std = (1.0 / cin as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let w = Array4::from_shape_fn((cin, cout, 2, 1), |_| normal.sample(&mut self.rng));
        Conv {
            w: self.params.add(format!("{name}.weight"), w),
            b: self.params.add(format!("{name}.bias"), Array4::zeros((1, cout, 1, 1))),
        }
    }

    fn norm(&mut self, name: &str, c: usize) -> Norm {
        self.running.push(RunningStats {
            mean: vec![0.0; c],
            var: vec![1.0; c],
        });
        Norm {
            gamma: self.params.add(format!("{name}.gamma"), Array4::ones((1, c, 1, 1))),
            beta: self.params.add(format!("{name}.beta"), Array4::zeros((1, c, 1, 1))),
            slot: self.running.len() - 1,
        }
    }

    fn block(&mut self, name: &str, cin: usize, cout: usize) -> ResBlock {
        ResBlock {
            norm1: self.norm(&format!("{name}.bn1"), cin),
            conv1: self.conv(&format!("{name}.conv1"), cin, cout, 3),
            norm2: self.norm(&format!("{name}.bn2"), cout),
            conv2: self.conv(&format!("{name}.conv2"), cout, cout, 3),
            shortcut: (cin != cout).then(|| self.conv(&format!("{name}.shortcut"), cin, cout, 1)),
        }
    }
}

impl MaskNet {
    pub fn new(config: MaskNetConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut running = Vec::new();
        let mut b = Builder {
            params: &mut params,
            running: &mut running,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let c0 = config.channels(0);
        let stem = b.conv("stem", 1, c0, 3);
        let mut encoders = Vec::new();
        let mut cin = c0;
        for level in 0..config.blocks {
            let c = config.channels(level);
            encoders.push(b.block(&format!("enc{level}"), cin, c));
            cin = c;
        }
        let bottleneck = b.block("bottleneck", cin, cin);
        let mut ups = Vec::new();
        let mut decoders = Vec::new();
        for level in (0..config.blocks).rev() {
            let c = config.channels(level);
            ups.push(b.up(&format!("up{level}"), cin, c));
            decoders.push(b.block(&format!("dec{level}"), 2 * c, c));
            cin = c;
        }
        let head = b.conv("head", c0, 1, 1);
        // start near the identity mask: softplus(ln(e - 1)) = 1
        params.value_mut(head.w).mapv_inplace(|v| v * 0.1);
        params.value_mut(head.b).fill((std::f64::consts::E - 1.0).ln());
        Ok(Self {
            config,
            params,
            running,
            stem,
            encoders,
            bottleneck,
            ups,
            decoders,
            head,
        })
    }

    fn conv(&self, g: &mut Graph, x: Var, c: &Conv) -> Result<Var> {
        let w = g.param(&self.params, c.w)?;
        let b = g.param(&self.params, c.b)?;
        g.conv2d(x, w, b)
    }

    fn norm_act(&mut self, g: &mut Graph, x: Var, n: &Norm, mode: Mode) -> Result<Var> {
        let gamma = g.param(&self.params, n.gamma)?;
        let beta = g.param(&self.params, n.beta)?;
        let y = match mode {
            Mode::Train => {
                let (y, mean, var) = g.batch_norm_train(x, gamma, beta, BN_EPS)?;
                let stats = &mut self.running[n.slot];
                for (r, m) in stats.mean.iter_mut().zip(&mean) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
                }
                for (r, v) in stats.var.iter_mut().zip(&var) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v;
                }
                y
            }
            Mode::Eval => {
                let stats = &self.running[n.slot];
                g.batch_norm_eval(x, gamma, beta, &stats.mean, &stats.var, BN_EPS)?
            }
        };
        g.leaky_relu(y, LEAKY_SLOPE)
    }

    fn block(&mut self, g: &mut Graph, x: Var, blk: &ResBlock, mode: Mode) -> Result<Var> {
        let h = self.norm_act(g, x, &blk.norm1, mode)?;
        let h = self.conv(g, h, &blk.conv1)?;
        let h = self.norm_act(g, h, &blk.norm2, mode)?;
        let h = self.conv(g, h, &blk.conv2)?;
        let skip = match &blk.shortcut {
            Some(c) => self.conv(g, x, c)?,
            None => x,
        };
        g.add(h, skip)
    }

    /// Records the network on `g`. `x` is `[batch, 1, num_mels, frames]`
    /// (log-compressed mel); the result is the non-negative mask.
    pub fn forward(&mut self, g: &mut Graph, x: Var, mode: Mode) -> Result<Var> {
        let (_, c, h, w) = g.value(x).dim();
        if c != 1 || h != self.config.num_mels || w == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("[_, 1, {}, >0]", self.config.num_mels),
                actual: format!("{:?}", g.value(x).shape()),
            });
        }
        // layer handles are cheap clones; detaching them keeps `self` free for stats updates
        let (stem, encoders, bottleneck, ups, decoders, head) = (
            self.stem.clone(),
            self.encoders.clone(),
            self.bottleneck.clone(),
            self.ups.clone(),
            self.decoders.clone(),
            self.head.clone(),
        );
        let mut h = self.conv(g, x, &stem)?;
        let mut skips = Vec::with_capacity(encoders.len());
        for blk in &encoders {
            h = self.block(g, h, blk, mode)?;
            skips.push(h);
            h = g.avg_pool_rows(h, 2)?;
        }
        h = self.block(g, h, &bottleneck, mode)?;
        for (up, blk) in ups.iter().zip(&decoders) {
            let w = g.param(&self.params, up.w)?;
            let b = g.param(&self.params, up.b)?;
            h = g.conv_transpose(h, w, b)?;
            let skip = skips.pop().expect("one skip per decoder");
            h = g.concat(h, skip)?;
            h = self.block(g, h, blk, mode)?;
        }
        h = self.conv(g, h, &head)?;
        g.softplus(h)
    }

    /// Mask for a single mel spectrogram (frames x mels), in eval mode.
    pub fn forward_mask(&mut self, x_mel: &MelSpectrogram) -> Result<Array2<f64>> {
        if x_mel.num_mels() != self.config.num_mels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mel bands", self.config.num_mels),
                actual: format!("{} mel bands", x_mel.num_mels()),
            });
        }
        let mut g = Graph::new();
        let x = g.input(to_net_input(&[&x_mel.frames])?)?;
        let x = g.log1p(x)?;
        let mask = self.forward(&mut g, x, Mode::Eval)?;
        Ok(from_net_output(g.value(mask), 0))
    }
}

/// Stacks frames x mels matrices into `[batch, 1, mels, frames]`.
pub fn to_net_input(items: &[&Array2<f64>]) -> Result<Array4<f64>> {
    let Some(first) = items.first() else {
        return Err(invalid("empty batch"));
    };
    let (t, m) = first.dim();
    let mut out = Array4::zeros((items.len(), 1, m, t));
    for (i, item) in items.iter().enumerate() {
        if item.dim() != (t, m) {
            return Err(Error::ShapeMismatch {
                expected: format!("{t}x{m}"),
                actual: format!("{:?}", item.dim()),
            });
        }
        out.index_axis_mut(Axis(0), i)
            .index_axis_mut(Axis(0), 0)
            .assign(&item.t());
    }
    Ok(out)
}

/// Item `i` of a `[batch, 1, mels, frames]` tensor as frames x mels.
pub fn from_net_output(t: &Array4<f64>, i: usize) -> Array2<f64> {
    t.index_axis(Axis(0), i).index_axis(Axis(0), 0).t().to_owned()
}

/// `mask * (X + eps)`.
pub fn restore_mel(net: &mut MaskNet, x_mel: &MelSpectrogram, eps: f64) -> Result<MelSpectrogram> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let mask = net.forward_mask(x_mel)?;
    Ok(x_mel.with_frames(apply_mask(&mask, &x_mel.frames, eps)))
}

pub fn apply_mask(mask: &Array2<f64>, x: &Array2<f64>, eps: f64) -> Array2<f64> {
    mask * &x.mapv(|v| v + eps)
}

/// Mean absolute error between equally shaped matrices.
pub fn mae_loss(est: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if est.dim() != target.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", target.dim()),
            actual: format!("{:?}", est.dim()),
        });
    }
    if est.is_empty() {
        return Err(Error::EmptySignal);
    }
    let total: f64 = est.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / est.len() as f64)
}

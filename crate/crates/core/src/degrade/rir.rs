//! Image-source room impulse responses for shoebox rooms.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Half-width of the fractional-delay interpolator, in samples.
const INTERP_HALF: usize = 8;
const INTERP_OVERSAMPLE: usize = 256;
/// Max displacement of reflected images, meters. Breaks up the periodic
/// "sweeping echo" pattern of a perfectly regular image lattice.
const IMAGE_JITTER: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub source_pos: [f64; 3],
    pub mic_pos: [f64; 3],
    pub rt60: f64,
    pub max_order: u32,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rt60 > 0.0 && self.rt60.is_finite()) {
            return Err(invalid(format!("rt60 must be positive, got {}", self.rt60)));
        }
        for axis in 0..3 {
            let l = self.dimensions[axis];
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid(format!("room dimension {axis} must be positive")));
            }
            for (name, p) in [("source", self.source_pos), ("mic", self.mic_pos)] {
                if !(p[axis] > 0.0 && p[axis] < l) {
                    return Err(invalid(format!("{name} position outside the room on axis {axis}")));
                }
            }
        }
        if self.direct_distance() < 1e-3 {
            return Err(invalid("source and microphone coincide"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    /// Uniform wall absorption from Sabine's formula.
    pub fn sabine_absorption(&self) -> f64 {
        0.161 * self.volume() / (self.rt60 * self.surface())
    }

    pub fn direct_distance(&self) -> f64 {
        distance(self.source_pos, self.mic_pos)
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Hann-windowed sinc on `[0, INTERP_HALF]`.
fn interp_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = INTERP_HALF * INTERP_OVERSAMPLE + 2;
        (0..n)
            .map(|i| {
                let x = i as f64 / INTERP_OVERSAMPLE as f64;
                let w = if x < INTERP_HALF as f64 {
                    0.5 + 0.5 * (std::f64::consts::PI * x / INTERP_HALF as f64).cos()
                } else {
                    0.0
                };
                crate::dsp::filter_sinc(x) * w
            })
            .collect()
    })
}

fn add_fractional_impulse(h: &mut [f64], delay: f64, amp: f64, table: &[f64]) {
    let base = delay.floor() as isize;
    let half = INTERP_HALF as isize;
    for k in (base - half + 1)..=(base + half) {
        if k < 0 || k as usize >= h.len() {
            continue;
        }
        let pos = (k as f64 - delay).abs() * INTERP_OVERSAMPLE as f64;
        let i = pos as usize;
        if i + 1 >= table.len() {
            continue;
        }
        let frac = pos - i as f64;
        h[k as usize] += amp * (table[i] * (1.0 - frac) + table[i + 1] * frac);
    }
}

/// RIR length: the requested decay time plus the direct-path delay.
pub fn rir_length(room: &RoomSpec, sample_rate: u32) -> usize {
    let fs = sample_rate as f64;
    (room.rt60 * fs).ceil() as usize + (room.direct_distance() / SPEED_OF_SOUND * fs).ceil() as usize + INTERP_HALF
}

/// One image source: reflection count, delay in samples, 1/(4 pi d) spreading.
#[derive(Debug, Clone, Copy)]
struct Image {
    order: u32,
    delay: f64,
    spreading: f64,
}

fn enumerate_images(room: &RoomSpec, fs: f64, max_delay: f64, seed: u64) -> Vec<Image> {
    let reach = max_delay / fs * SPEED_OF_SOUND;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = room.dimensions;
    let src = room.source_pos;
    let mic = room.mic_pos;
    let bound = |axis: usize| (reach / (2.0 * dims[axis])).ceil() as i64 + 1;
    let (bx, by, bz) = (bound(0), bound(1), bound(2));
    let limit = (reach + IMAGE_JITTER).powi(2);
    let mut images = Vec::new();

    for nx in -bx..=bx {
        for qx in 0..2i64 {
            let ox = (nx - qx).unsigned_abs() + nx.unsigned_abs();
            let dx = (1 - 2 * qx) as f64 * src[0] + 2.0 * nx as f64 * dims[0] - mic[0];
            if dx * dx > limit {
                continue;
            }
            for ny in -by..=by {
                for qy in 0..2i64 {
                    let oy = (ny - qy).unsigned_abs() + ny.unsigned_abs();
                    let dy = (1 - 2 * qy) as f64 * src[1] + 2.0 * ny as f64 * dims[1] - mic[1];
                    if dx * dx + dy * dy > limit {
                        continue;
                    }
                    for nz in -bz..=bz {
                        for qz in 0..2i64 {
                            let oz = (nz - qz).unsigned_abs() + nz.unsigned_abs();
                            let order = ox + oy + oz;
                            if order > room.max_order as u64 {
                                continue;
                            }
                            let dz = (1 - 2 * qz) as f64 * src[2] + 2.0 * nz as f64 * dims[2] - mic[2];
                            if dx * dx + dy * dy + dz * dz > limit {
                                continue;
                            }
                            let (jx, jy, jz) = if order > 0 {
                                (
                                    rng.gen_range(-IMAGE_JITTER..=IMAGE_JITTER),
                                    rng.gen_range(-IMAGE_JITTER..=IMAGE_JITTER),
                                    rng.gen_range(-IMAGE_JITTER..=IMAGE_JITTER),
                                )
                            } else {
                                (0.0, 0.0, 0.0)
                            };
                            let d = ((dx + jx).powi(2) + (dy + jy).powi(2) + (dz + jz).powi(2)).sqrt();
                            let delay = d / SPEED_OF_SOUND * fs;
                            if delay >= max_delay {
                                continue;
                            }
                            images.push(Image {
                                order: order as u32,
                                delay,
                                spreading: 1.0 / (4.0 * std::f64::consts::PI * d.max(1e-3)),
                            });
                        }
                    }
                }
            }
        }
    }
    images
}

fn render(images: &[Image], len: usize, alpha: f64) -> Vec<f64> {
    let table = interp_table();
    let beta = (1.0 - alpha).sqrt();
    let mut h = vec![0.0; len];
    for img in images {
        let amp = beta.powi(img.order as i32) * img.spreading;
        if amp != 0.0 {
            add_fractional_impulse(&mut h, img.delay, amp, table);
        }
    }
    h
}

/// Per-reflection-order renders, so the response for any absorption is
/// `sum_k (1 - alpha)^(k/2) * layers[k]`.
struct OrderLayers {
    layers: Vec<Vec<f64>>,
}

impl OrderLayers {
    fn new(images: &[Image], len: usize) -> Self {
        let table = interp_table();
        let max_order = images.iter().map(|i| i.order).max().unwrap_or(0) as usize;
        let mut layers = vec![vec![0.0; len]; max_order + 1];
        for img in images {
            add_fractional_impulse(&mut layers[img.order as usize], img.delay, img.spreading, table);
        }
        Self { layers }
    }

    fn combine(&self, alpha: f64) -> Vec<f64> {
        let beta = (1.0 - alpha).sqrt();
        let mut h = vec![0.0; self.layers.first().map_or(0, Vec::len)];
        let mut gain = 1.0;
        for layer in &self.layers {
            if gain == 0.0 {
                break;
            }
            for (o, v) in h.iter_mut().zip(layer) {
                *o += gain * v;
            }
            gain *= beta;
        }
        h
    }
}

fn line_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Absorption whose rendered response has the requested Schroeder RT60.
///
/// Sabine's formula only bounds feasibility: specular images in a shoebox
/// decay non-exponentially, so the absorption is fitted to the image set.
fn calibrate_absorption(layers: &OrderLayers, sample_rate: u32, rt60: f64) -> f64 {
    // Truncation at the requested length makes very low absorption look
    // short again, and near-anechoic responses fit only the interpolation
    // kernel, so walk down from alpha = 0.99 to the first bracket and bisect
    // on ln(-ln(1 - alpha)) inside it.
    let to_u = |a: f64| (-(1.0 - a).ln()).ln();
    let from_u = |u: f64| 1.0 - (-(u.exp())).exp();
    let too_slow = |u: f64| match schroeder_fit(&layers.combine(from_u(u)), sample_rate) {
        Decay::Rt60(t) => t > rt60,
        Decay::TooSlow => true,
        Decay::Collapsed => false,
    };
    let (top, bottom) = (to_u(0.99), to_u(1e-4));
    let steps = 32;
    let mut hi = top;
    let mut lo = bottom;
    for i in 1..=steps {
        let u = top + (bottom - top) * i as f64 / steps as f64;
        if too_slow(u) {
            lo = u;
            break;
        }
        hi = u;
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if too_slow(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from_u(0.5 * (lo + hi))
}

/// Image-source RIR for the room's RT60.
///
/// Rooms whose Sabine absorption would exceed 1 are rejected. The uniform
/// wall absorption is then fitted so the simulated energy decay matches the
/// requested RT60.
pub fn simulate_rir(room: &RoomSpec, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    room.validate()?;
    if sample_rate == 0 {
        return Err(invalid("sample_rate must be positive"));
    }
    let sabine = room.sabine_absorption();
    if sabine > 1.0 {
        return Err(Error::InfeasibleRt60 {
            rt60: room.rt60,
            alpha: sabine,
        });
    }
    let fs = sample_rate as f64;
    let len = rir_length(room, sample_rate);
    let images = enumerate_images(room, fs, (len - INTERP_HALF) as f64, seed);
    let layers = OrderLayers::new(&images, len);
    let alpha = calibrate_absorption(&layers, sample_rate, room.rt60);
    Ok(layers.combine(alpha))
}

/// Image-source RIR with an explicit uniform energy absorption coefficient.
pub fn simulate_rir_with_absorption(room: &RoomSpec, sample_rate: u32, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    room.validate()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("absorption {alpha} outside [0, 1]")));
    }
    if sample_rate == 0 {
        return Err(invalid("sample_rate must be positive"));
    }
    let fs = sample_rate as f64;
    let len = rir_length(room, sample_rate);
    let images = enumerate_images(room, fs, (len - INTERP_HALF) as f64, seed);
    Ok(render(&images, len, alpha))
}

/// Reflection order that lets image sources fill a response of the given
/// duration.
pub fn covering_order(dimensions: [f64; 3], duration_s: f64) -> u32 {
    let reach = duration_s * SPEED_OF_SOUND;
    dimensions
        .iter()
        .map(|l| (reach / l).ceil() as u32 + 1)
        .sum()
}

/// Draws a feasible random shoebox room.
///
/// Dimensions are uniform in [3, 10] m per axis, RT60 uniform in
/// [0.05, 1.0] s, source and microphone at least 0.5 m from every wall.
/// Draws whose Sabine absorption exceeds 1 are rejected and redrawn.
pub fn sample_room(seed: u64) -> RoomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let dimensions = [
            rng.gen_range(3.0..=10.0),
            rng.gen_range(3.0..=10.0),
            rng.gen_range(3.0..=10.0),
        ];
        let rt60: f64 = rng.gen_range(0.05..=1.0);
        let mut pos = || {
            [
                rng.gen_range(0.5..=dimensions[0] - 0.5),
                rng.gen_range(0.5..=dimensions[1] - 0.5),
                rng.gen_range(0.5..=dimensions[2] - 0.5),
            ]
        };
        let source_pos = pos();
        let mic_pos = pos();
        let room = RoomSpec {
            dimensions,
            source_pos,
            mic_pos,
            rt60,
            max_order: covering_order(dimensions, rt60 + 0.05),
        };
        if room.sabine_absorption() <= 1.0 && room.direct_distance() >= 0.2 {
            return room;
        }
    }
}

/// Outcome of a Schroeder fit.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Decay {
    Rt60(f64),
    /// the curve never fell far enough to fit
    TooSlow,
    /// the curve fell through the fit range within a couple of samples
    Collapsed,
}

fn schroeder_fit(rir: &[f64], sample_rate: u32) -> Decay {
    let start = rir
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
        .0;
    let h = &rir[start..];
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for i in (0..h.len()).rev() {
        acc += h[i] * h[i];
        edc[i] = acc;
    }
    if acc <= 0.0 {
        return Decay::TooSlow;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / acc).log10()).collect();
    let Some(first) = db.iter().position(|&v| v <= -5.0) else {
        return Decay::TooSlow;
    };
    let Some(end) = db
        .iter()
        .position(|&v| v <= -35.0)
        .or_else(|| db.iter().position(|&v| v <= -25.0))
    else {
        return Decay::TooSlow;
    };
    if end <= first + 1 {
        return Decay::Collapsed;
    }
    let slope = line_slope(&db[first..end]);
    if slope >= 0.0 {
        return Decay::TooSlow;
    }
    Decay::Rt60(-60.0 / slope / sample_rate as f64)
}

/// RT60 from Schroeder backward integration: a line fit to the energy
/// decay curve between -5 dB and -35 dB (or -25 dB when the response is too
/// short), extrapolated to -60 dB.
pub fn schroeder_rt60(rir: &[f64], sample_rate: u32) -> Option<f64> {
    match schroeder_fit(rir, sample_rate) {
        Decay::Rt60(t) => Some(t),
        _ => None,
    }
}

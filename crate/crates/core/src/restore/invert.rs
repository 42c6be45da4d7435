use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::dsp::{MelFilterbank, MelSpectrogram};
use crate::error::{Error, Result};

/// How mel frames are mapped back to linear magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inversion {
    /// Minimum-norm least squares with negatives set to zero.
    PseudoInverse,
    /// Per-frame non-negative least squares.
    #[default]
    Nnls,
}

pub const NNLS_MAX_SWEEPS: usize = 200;
pub const NNLS_TOL: f64 = 1e-8;

/// Cached inverse of a filterbank: the pseudo-inverse and the banded Gram
/// matrix `W W^T` used by the coordinate-descent solver.
#[derive(Debug, Clone)]
pub struct MelInverter {
    weights: Array2<f64>,
    /// mels x bins
    pinv: Array2<f64>,
    gram_start: Vec<usize>,
    gram_rows: Vec<Vec<f64>>,
}

impl MelInverter {
    pub fn new(fb: &MelFilterbank) -> Result<Self> {
        let w = &fb.weights;
        let (bins, mels) = w.dim();
        let wm = DMatrix::from_fn(bins, mels, |i, j| w[[i, j]]);
        let wtw = wm.transpose() * &wm;
        let inv = wtw
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("mel filterbank is rank deficient".into()))?;
        let p = inv * wm.transpose();
        let pinv = Array2::from_shape_fn((mels, bins), |(i, j)| p[(i, j)]);

        let mut gram_start = Vec::with_capacity(bins);
        let mut gram_rows = Vec::with_capacity(bins);
        let supports: Vec<(usize, usize)> = (0..mels).map(|m| fb.support(m)).collect();
        for j in 0..bins {
            let bands: Vec<usize> = (0..mels).filter(|&m| w[[j, m]] > 0.0).collect();
            if bands.is_empty() {
                gram_start.push(j);
                gram_rows.push(vec![0.0]);
                continue;
            }
            let lo = bands.iter().map(|&m| supports[m].0).min().unwrap_or(j);
            let hi = bands.iter().map(|&m| supports[m].1).max().unwrap_or(j);
            let row = (lo..=hi)
                .map(|k| bands.iter().map(|&m| w[[j, m]] * w[[k, m]]).sum())
                .collect();
            gram_start.push(lo);
            gram_rows.push(row);
        }
        Ok(Self {
            weights: w.clone(),
            pinv,
            gram_start,
            gram_rows,
        })
    }

    pub fn num_mels(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.nrows()
    }

    fn check(&self, mel: &Array2<f64>) -> Result<()> {
        if mel.ncols() != self.num_mels() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mel bands", self.num_mels()),
                actual: format!("{} mel bands", mel.ncols()),
            });
        }
        Ok(())
    }

    /// `M W^+` with negatives clamped to zero, frames x bins.
    pub fn pseudo_inverse(&self, mel: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(mel)?;
        Ok(mel.dot(&self.pinv).mapv(|v| v.max(0.0)))
    }

    /// Per-frame `min |m - W^T x|` subject to `x >= 0`, by projected
    /// coordinate descent warm-started from the clamped pseudo-inverse.
    pub fn nnls(&self, mel: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = self.pseudo_inverse(mel)?;
        for (m, x) in mel.rows().into_iter().zip(out.rows_mut()) {
            self.nnls_frame(m, x);
        }
        Ok(out)
    }

    fn nnls_frame(&self, m: ArrayView1<f64>, mut x: ArrayViewMut1<f64>) {
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            x.fill(0.0);
            return;
        }
        // gradient of 0.5 |W^T x - m|^2 is W (W^T x - m)
        let resid = self.weights.t().dot(&x) - &m;
        let mut grad = self.weights.dot(&resid);
        let tol = NNLS_TOL * scale;
        for _ in 0..NNLS_MAX_SWEEPS {
            let mut largest = 0.0f64;
            for j in 0..x.len() {
                let start = self.gram_start[j];
                let row = &self.gram_rows[j];
                let diag = row[j - start];
                if diag <= 0.0 {
                    x[j] = 0.0;
                    continue;
                }
                let new = (x[j] - grad[j] / diag).max(0.0);
                let delta = new - x[j];
                if delta != 0.0 {
                    x[j] = new;
                    for (k, q) in row.iter().enumerate() {
                        grad[start + k] += delta * q;
                    }
                    largest = largest.max(delta.abs());
                }
            }
            if largest <= tol {
                break;
            }
        }
    }

    pub fn invert(&self, mel: &Array2<f64>, method: Inversion) -> Result<Array2<f64>> {
        match method {
            Inversion::PseudoInverse => self.pseudo_inverse(mel),
            Inversion::Nnls => self.nnls(mel),
        }
    }
}

/// Linear magnitude spectrogram (frames x bins) whose mel projection
/// approximates `mel`.
pub fn mel_to_linear(mel: &MelSpectrogram, fb: &MelFilterbank, method: Inversion) -> Result<Array2<f64>> {
    MelInverter::new(fb)?.invert(&mel.frames, method)
}

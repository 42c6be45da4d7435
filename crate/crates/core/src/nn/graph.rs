use ndarray::{s, Array2, Array4, ArrayView4, Axis, Zip};

use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Index of a trainable tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors and their accumulated gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array4<f64>>,
    grads: Vec<Array4<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array4<f64>) -> ParamId {
        self.names.push(name.into());
        self.grads.push(Array4::zeros(value.raw_dim()));
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array4<f64> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array4<f64> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Array4<f64> {
        &self.grads[id.0]
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Conv2d { x: Var, w: Var, b: Var },
    ConvTranspose { x: Var, w: Var, b: Var },
    AvgPool { x: Var, factor: usize },
    BatchNormTrain { x: Var, gamma: Var, beta: Var, xhat: Array4<f64>, inv_std: Vec<f64> },
    BatchNormEval { x: Var, gamma: Var, beta: Var, mean: Vec<f64>, inv_std: Vec<f64> },
    LeakyRelu { x: Var, slope: f64 },
    Softplus { x: Var },
    Log1p { x: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    AddScalar { x: Var },
    Concat { a: Var, b: Var },
    Mae { a: Var, b: Var },
    WeightedSum { x: Var, weights: Array4<f64> },
}

#[derive(Debug)]
struct Node {
    value: Array4<f64>,
    op: Op,
}

/// Tape of tensor operations supporting reverse-mode differentiation.
///
/// Tensors are 4-d, laid out `[batch, channel, height, width]`; scalars are
/// `[1, 1, 1, 1]`.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Array4<f64>>>,
}

fn scalar(v: f64) -> Array4<f64> {
    Array4::from_elem((1, 1, 1, 1), v)
}

fn same_shape(a: &Array4<f64>, b: &Array4<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} {:?}", a.shape()),
            actual: format!("{:?}", b.shape()),
        });
    }
    Ok(())
}

fn graph_err(msg: impl Into<String>) -> Error {
    Error::Graph(msg.into())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array4<f64>, op: Op) -> Result<Var> {
        if !value.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("forward pass"));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Array4<f64> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Array4<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn input(&mut self, value: Array4<f64>) -> Result<Var> {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// Stride-1 convolution with odd kernels and same padding.
    /// `w` is `[out, in, kh, kw]`, `b` is `[1, out, 1, 1]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, c, h, wd) = xv.dim();
        let (o, ci, kh, kw) = wv.dim();
        if ci != c || kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("odd kernel over {c} input channels"),
                actual: format!("{:?}", wv.shape()),
            });
        }
        if bv.dim() != (1, o, 1, 1) {
            return Err(Error::ShapeMismatch {
                expected: format!("bias [1, {o}, 1, 1]"),
                actual: format!("{:?}", bv.shape()),
            });
        }
        let wmat = weight_matrix(wv);
        let mut out = Array4::zeros((n, o, h, wd));
        for i in 0..n {
            let cols = im2col(xv.slice(s![i..i + 1, .., .., ..]), kh, kw);
            let y = wmat.dot(&cols);
            let y = y.into_shape_with_order((o, h, wd)).expect("conv output size");
            out.slice_mut(s![i, .., .., ..]).assign(&y);
        }
        out += &bv.view();
        self.push(out, Op::Conv2d { x, w, b })
    }

    /// Transposed convolution whose stride equals its kernel size, so the
    /// spatial size grows by exactly `(kh, kw)`. `w` is `[in, out, kh, kw]`.
    pub fn conv_transpose(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, c, h, wd) = xv.dim();
        let (ci, o, kh, kw) = wv.dim();
        if ci != c {
            return Err(Error::ShapeMismatch {
                expected: format!("kernel over {c} input channels"),
                actual: format!("{:?}", wv.shape()),
            });
        }
        if bv.dim() != (1, o, 1, 1) {
            return Err(Error::ShapeMismatch {
                expected: format!("bias [1, {o}, 1, 1]"),
                actual: format!("{:?}", bv.shape()),
            });
        }
        let wmat = wv.to_shape((ci, o * kh * kw)).expect("weight reshape").to_owned();
        let mut out = Array4::zeros((n, o, h * kh, wd * kw));
        for i in 0..n {
            let xm = xv
                .slice(s![i, .., .., ..])
                .to_shape((c, h * wd))
                .expect("input reshape")
                .to_owned();
            let prod = wmat.t().dot(&xm);
            for oc in 0..o {
                for a in 0..kh {
                    for bb in 0..kw {
                        let row = prod.row((oc * kh + a) * kw + bb);
                        for y in 0..h {
                            for xx in 0..wd {
                                out[[i, oc, y * kh + a, xx * kw + bb]] = row[y * wd + xx] + bv[[0, oc, 0, 0]];
                            }
                        }
                    }
                }
            }
        }
        self.push(out, Op::ConvTranspose { x, w, b })
    }

    /// Average pooling over non-overlapping groups of `factor` rows.
    pub fn avg_pool_rows(&mut self, x: Var, factor: usize) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        if factor == 0 || h % factor != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("height divisible by {factor}"),
                actual: format!("height {h}"),
            });
        }
        let mut out = Array4::zeros((n, c, h / factor, w));
        for k in 0..factor {
            out += &xv.slice(s![.., .., k..;factor, ..]);
        }
        out /= factor as f64;
        self.push(out, Op::AvgPool { x, factor })
    }

    /// Batch normalization with batch statistics over `(batch, height, width)`.
    /// Returns the output plus the per-channel mean and unbiased variance.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        check_channel_param(self.value(gamma), c)?;
        check_channel_param(self.value(beta), c)?;
        let count = (n * h * w) as f64;
        if count < 2.0 {
            return Err(graph_err("batch norm needs at least two values per channel"));
        }
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        let mut inv_std = vec![0.0; c];
        let mut xhat = Array4::zeros(xv.raw_dim());
        for ch in 0..c {
            let lane = xv.index_axis(Axis(1), ch);
            let m = lane.sum() / count;
            let v = lane.iter().map(|&t| (t - m) * (t - m)).sum::<f64>() / count;
            mean[ch] = m;
            var[ch] = v * count / (count - 1.0);
            inv_std[ch] = 1.0 / (v + eps).sqrt();
            let is = inv_std[ch];
            xhat.index_axis_mut(Axis(1), ch)
                .zip_mut_with(&lane, |o, &t| *o = (t - m) * is);
        }
        let out = affine(&xhat, self.value(gamma), self.value(beta));
        let var_out = var.clone();
        let y = self.push(out, Op::BatchNormTrain { x, gamma, beta, xhat, inv_std })?;
        Ok((y, mean, var_out))
    }

    /// Batch normalization with fixed statistics.
    pub fn batch_norm_eval(&mut self, x: Var, gamma: Var, beta: Var, mean: &[f64], var: &[f64], eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.dim().1;
        check_channel_param(self.value(gamma), c)?;
        check_channel_param(self.value(beta), c)?;
        if mean.len() != c || var.len() != c {
            return Err(graph_err(format!("running statistics for {} channels, input has {c}", mean.len())));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = xv.clone();
        for ch in 0..c {
            let (m, is) = (mean[ch], inv_std[ch]);
            xhat.index_axis_mut(Axis(1), ch).mapv_inplace(|t| (t - m) * is);
        }
        let out = affine(&xhat, self.value(gamma), self.value(beta));
        self.push(
            out,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                mean: mean.to_vec(),
                inv_std,
            },
        )
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu { x, slope })
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(|v| v.max(0.0) + (-v.abs()).exp().ln_1p());
        self.push(out, Op::Softplus { x })
    }

    pub fn log1p(&mut self, x: Var) -> Result<Var> {
        if self.value(x).iter().any(|&v| v <= -1.0) {
            return Err(graph_err("log1p of a value <= -1"));
        }
        let out = self.value(x).mapv(f64::ln_1p);
        self.push(out, Op::Log1p { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul { a, b })
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x) + c;
        self.push(out, Op::AddScalar { x })
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, ca, h, w) = av.dim();
        let (nb, cb, hb, wb) = bv.dim();
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::ShapeMismatch {
                expected: format!("concat partner [{n}, _, {h}, {w}]"),
                actual: format!("{:?}", bv.shape()),
            });
        }
        let mut out = Array4::zeros((n, ca + cb, h, w));
        out.slice_mut(s![.., ..ca, .., ..]).assign(av);
        out.slice_mut(s![.., ca.., .., ..]).assign(bv);
        self.push(out, Op::Concat { a, b })
    }

    /// Mean absolute difference, a scalar.
    pub fn mae(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mae")?;
        let (av, bv) = (self.value(a), self.value(b));
        let total: f64 = Zip::from(av).and(bv).fold(0.0, |acc, &p, &q| acc + (p - q).abs());
        let out = scalar(total / av.len() as f64);
        self.push(out, Op::Mae { a, b })
    }

    /// `sum(x * weights)` with constant weights, a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: Array4<f64>) -> Result<Var> {
        same_shape(self.value(x), &weights, "weighted_sum")?;
        let out = scalar((self.value(x) * &weights).sum());
        self.push(out, Op::WeightedSum { x, weights })
    }

    /// Reverse pass from the scalar `loss`, accumulating parameter gradients
    /// into `store`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(graph_err("backward called before any forward operation"));
        }
        if loss.0 >= self.nodes.len() {
            return Err(graph_err("loss node is not on this graph"));
        }
        if self.value(loss).len() != 1 {
            return Err(graph_err(format!("loss must be scalar, got {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Array4<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads, store);
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Array4<f64>, grads: &mut [Option<Array4<f64>>], store: &mut ParamStore) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, d: Array4<f64>| match &mut grads[v.0] {
            Some(e) => *e += &d,
            slot => *slot = Some(d),
        };
        match &node.op {
            Op::Input => {}
            Op::Param(id) => store.grads[id.0] += g,
            Op::Conv2d { x, w, b } => {
                let (dx, dw) = conv2d_backward(self.value(*x), self.value(*w), g);
                acc(*x, dx);
                acc(*w, dw);
                acc(*b, channel_sum(g));
            }
            Op::ConvTranspose { x, w, b } => {
                let (dx, dw) = conv_transpose_backward(self.value(*x), self.value(*w), g);
                acc(*x, dx);
                acc(*w, dw);
                acc(*b, channel_sum(g));
            }
            Op::AvgPool { x, factor } => {
                let mut dx = Array4::zeros(self.value(*x).raw_dim());
                let scaled = g / *factor as f64;
                for k in 0..*factor {
                    dx.slice_mut(s![.., .., k..;*factor, ..]).assign(&scaled);
                }
                acc(*x, dx);
            }
            Op::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                let gv = self.value(*gamma);
                let (n, c, h, w) = xhat.dim();
                let count = (n * h * w) as f64;
                let mut dx = Array4::zeros(xhat.raw_dim());
                let mut dgamma = Array4::zeros((1, c, 1, 1));
                let mut dbeta = Array4::zeros((1, c, 1, 1));
                for ch in 0..c {
                    let gl = g.index_axis(Axis(1), ch);
                    let xl = xhat.index_axis(Axis(1), ch);
                    let sum_g: f64 = gl.sum();
                    let sum_gx: f64 = Zip::from(&gl).and(&xl).fold(0.0, |a, &p, &q| a + p * q);
                    dgamma[[0, ch, 0, 0]] = sum_gx;
                    dbeta[[0, ch, 0, 0]] = sum_g;
                    let k = gv[[0, ch, 0, 0]] * inv_std[ch] / count;
                    Zip::from(dx.index_axis_mut(Axis(1), ch))
                        .and(&gl)
                        .and(&xl)
                        .for_each(|d, &p, &q| *d = k * (count * p - sum_g - q * sum_gx));
                }
                acc(*x, dx);
                acc(*gamma, dgamma);
                acc(*beta, dbeta);
            }
            Op::BatchNormEval { x, gamma, beta, mean, inv_std } => {
                let (xv, gv) = (self.value(*x), self.value(*gamma));
                let c = xv.dim().1;
                let mut dx = g.clone();
                let mut dgamma = Array4::zeros((1, c, 1, 1));
                let mut dbeta = Array4::zeros((1, c, 1, 1));
                for ch in 0..c {
                    let gl = g.index_axis(Axis(1), ch);
                    let xl = xv.index_axis(Axis(1), ch);
                    let (m, is) = (mean[ch], inv_std[ch]);
                    dgamma[[0, ch, 0, 0]] = Zip::from(&gl).and(&xl).fold(0.0, |a, &p, &q| a + p * (q - m) * is);
                    dbeta[[0, ch, 0, 0]] = gl.sum();
                    let k = gv[[0, ch, 0, 0]] * is;
                    dx.index_axis_mut(Axis(1), ch).mapv_inplace(|p| p * k);
                }
                acc(*x, dx);
                acc(*gamma, dgamma);
                acc(*beta, dbeta);
            }
            Op::LeakyRelu { x, slope } => {
                let mut dx = g.clone();
                Zip::from(&mut dx)
                    .and(self.value(*x))
                    .for_each(|d, &v| if v <= 0.0 { *d *= slope });
                acc(*x, dx);
            }
            Op::Softplus { x } => {
                let mut dx = g.clone();
                Zip::from(&mut dx)
                    .and(self.value(*x))
                    .for_each(|d, &v| *d /= 1.0 + (-v).exp());
                acc(*x, dx);
            }
            Op::Log1p { x } => {
                let mut dx = g.clone();
                Zip::from(&mut dx).and(self.value(*x)).for_each(|d, &v| *d /= 1.0 + v);
                acc(*x, dx);
            }
            Op::Add { a, b } => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul { a, b } => {
                acc(*a, g * self.value(*b));
                acc(*b, g * self.value(*a));
            }
            Op::AddScalar { x } => acc(*x, g.clone()),
            Op::Concat { a, b } => {
                let ca = self.value(*a).dim().1;
                acc(*a, g.slice(s![.., ..ca, .., ..]).to_owned());
                acc(*b, g.slice(s![.., ca.., .., ..]).to_owned());
            }
            Op::Mae { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let scale = g[[0, 0, 0, 0]] / av.len() as f64;
                let mut da = Array4::zeros(av.raw_dim());
                Zip::from(&mut da).and(av).and(bv).for_each(|d, &p, &q| {
                    *d = if p > q {
                        scale
                    } else if p < q {
                        -scale
                    } else {
                        0.0
                    }
                });
                acc(*b, -&da);
                acc(*a, da);
            }
            Op::WeightedSum { x, weights } => acc(*x, weights * g[[0, 0, 0, 0]]),
        }
    }
}

fn check_channel_param(p: &Array4<f64>, c: usize) -> Result<()> {
    if p.dim() != (1, c, 1, 1) {
        return Err(Error::ShapeMismatch {
            expected: format!("[1, {c}, 1, 1]"),
            actual: format!("{:?}", p.shape()),
        });
    }
    Ok(())
}

fn affine(xhat: &Array4<f64>, gamma: &Array4<f64>, beta: &Array4<f64>) -> Array4<f64> {
    let mut out = xhat * gamma;
    out += beta;
    out
}

fn channel_sum(g: &Array4<f64>) -> Array4<f64> {
    let c = g.dim().1;
    let mut out = Array4::zeros((1, c, 1, 1));
    for ch in 0..c {
        out[[0, ch, 0, 0]] = g.index_axis(Axis(1), ch).sum();
    }
    out
}

fn weight_matrix(w: &Array4<f64>) -> Array2<f64> {
    let (o, c, kh, kw) = w.dim();
    w.to_shape((o, c * kh * kw)).expect("weight reshape").to_owned()
}

/// Patch matrix `[c*kh*kw, h*w]` of a single-item batch with same padding.
fn im2col(x: ArrayView4<f64>, kh: usize, kw: usize) -> Array2<f64> {
    let (_, c, h, w) = x.dim();
    let (ph, pw) = (kh / 2, kw / 2);
    let mut cols = Array2::zeros((c * kh * kw, h * w));
    for ch in 0..c {
        for i in 0..kh {
            for j in 0..kw {
                let mut row = cols.row_mut((ch * kh + i) * kw + j);
                for y in 0..h {
                    let Some(yy) = (y + i).checked_sub(ph).filter(|&v| v < h) else { continue };
                    for xx in 0..w {
                        if let Some(src) = (xx + j).checked_sub(pw).filter(|&v| v < w) {
                            row[y * w + xx] = x[[0, ch, yy, src]];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im_add(cols: &Array2<f64>, dx: &mut ndarray::ArrayViewMut3<f64>, kh: usize, kw: usize) {
    let (c, h, w) = dx.dim();
    let (ph, pw) = (kh / 2, kw / 2);
    for ch in 0..c {
        for i in 0..kh {
            for j in 0..kw {
                let row = cols.row((ch * kh + i) * kw + j);
                for y in 0..h {
                    let Some(yy) = (y + i).checked_sub(ph).filter(|&v| v < h) else { continue };
                    for xx in 0..w {
                        if let Some(src) = (xx + j).checked_sub(pw).filter(|&v| v < w) {
                            dx[[ch, yy, src]] += row[y * w + xx];
                        }
                    }
                }
            }
        }
    }
}

fn conv2d_backward(x: &Array4<f64>, w: &Array4<f64>, g: &Array4<f64>) -> (Array4<f64>, Array4<f64>) {
    let (n, _, h, wd) = x.dim();
    let (o, c, kh, kw) = w.dim();
    let wmat = weight_matrix(w);
    let mut dw = Array2::<f64>::zeros((o, c * kh * kw));
    let mut dx = Array4::zeros(x.raw_dim());
    for i in 0..n {
        let cols = im2col(x.slice(s![i..i + 1, .., .., ..]), kh, kw);
        let gm = g.slice(s![i, .., .., ..]).to_shape((o, h * wd)).expect("grad reshape").to_owned();
        dw += &gm.dot(&cols.t());
        let dcols = wmat.t().dot(&gm);
        col2im_add(&dcols, &mut dx.slice_mut(s![i, .., .., ..]), kh, kw);
    }
    let dw = dw.into_shape_with_order((o, c, kh, kw)).expect("weight grad reshape");
    (dx, dw)
}

fn conv_transpose_backward(x: &Array4<f64>, w: &Array4<f64>, g: &Array4<f64>) -> (Array4<f64>, Array4<f64>) {
    let (n, c, h, wd) = x.dim();
    let (_, o, kh, kw) = w.dim();
    let wmat = w.to_shape((c, o * kh * kw)).expect("weight reshape").to_owned();
    let mut dw = Array2::<f64>::zeros((c, o * kh * kw));
    let mut dx = Array4::zeros(x.raw_dim());
    for i in 0..n {
        let mut dprod = Array2::zeros((o * kh * kw, h * wd));
        for oc in 0..o {
            for a in 0..kh {
                for b in 0..kw {
                    let mut row = dprod.row_mut((oc * kh + a) * kw + b);
                    for y in 0..h {
                        for xx in 0..wd {
                            row[y * wd + xx] = g[[i, oc, y * kh + a, xx * kw + b]];
                        }
                    }
                }
            }
        }
        let xm = x.slice(s![i, .., .., ..]).to_shape((c, h * wd)).expect("input reshape").to_owned();
        dw += &xm.dot(&dprod.t());
        let dxm = wmat.dot(&dprod).into_shape_with_order((c, h, wd)).expect("input grad reshape");
        dx.slice_mut(s![i, .., .., ..]).assign(&dxm);
    }
    let dw = dw.into_shape_with_order((c, o, kh, kw)).expect("weight grad reshape");
    (dx, dw)
}

//! Layer definitions with batched forward and backward passes.
//!
//! Activations travel as flat row-major buffers of `rows * width` values.
//! Convolutional activations lay out each row as `position * channels +
//! channel`, so a window of consecutive positions is one contiguous slice.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{elu, elu_grad, glorot_values, relu, relu_grad};
use crate::model::ModelError;
use crate::rng::Rng;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for batch-norm, dropout active.
    Train,
    /// Running statistics, dropout off.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Vec<f64>,
    /// Whether the elastic-net penalty applies.
    pub penalized: bool,
    #[serde(skip)]
    pub grad: Vec<f64>,
    #[serde(skip)]
    pub(crate) m: Vec<f64>,
    #[serde(skip)]
    pub(crate) v: Vec<f64>,
}

impl Param {
    fn new(value: Vec<f64>, penalized: bool) -> Self {
        let n = value.len();
        Self {
            value,
            penalized,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// Restores gradient and optimizer buffers after deserialization.
    pub(crate) fn ensure_state(&mut self) {
        let n = self.value.len();
        for buf in [&mut self.grad, &mut self.m, &mut self.v] {
            if buf.len() != n {
                *buf = vec![0.0; n];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize },
    BatchNorm,
    Elu { alpha: f64 },
    Relu,
    Dropout { rate: f64 },
    Conv1d { filters: usize, kernel: usize },
    MaxPool { window: usize },
    Flatten,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        n_in: usize,
        n_out: usize,
        /// `n_in x n_out`, row-major.
        w: Param,
        b: Param,
    },
    BatchNorm {
        width: usize,
        gamma: Param,
        beta: Param,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        momentum: f64,
        eps: f64,
    },
    Elu {
        alpha: f64,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Conv1d {
        in_len: usize,
        in_ch: usize,
        kernel: usize,
        filters: usize,
        /// `filters x kernel x in_ch`, row-major.
        w: Param,
        b: Param,
    },
    MaxPool {
        in_len: usize,
        channels: usize,
        window: usize,
    },
    Flatten,
    Softmax,
}

/// Per-layer values kept from the forward pass for the backward pass.
pub(crate) enum Aux {
    None,
    BatchNorm {
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        /// Batch mean and variance, present in training mode.
        stats: Option<(Vec<f64>, Vec<f64>)>,
    },
    Mask(Vec<f64>),
    Argmax(Vec<u32>),
}

/// `(length, channels)` of one row's activation.
pub type Shape = (usize, usize);

impl Layer {
    pub fn from_spec(spec: &LayerSpec, input: Shape, rng: &mut Rng) -> Result<(Layer, Shape), ModelError> {
        let (len, ch) = input;
        let width = len * ch;
        Ok(match *spec {
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(ModelError::ShapeMismatch("dense layer with 0 units".into()));
                }
                let w = glorot_values(width * units, width, units, rng);
                (
                    Layer::Dense {
                        n_in: width,
                        n_out: units,
                        w: Param::new(w, true),
                        b: Param::new(vec![0.0; units], false),
                    },
                    (units, 1),
                )
            }
            LayerSpec::BatchNorm => (
                Layer::BatchNorm {
                    width,
                    gamma: Param::new(vec![1.0; width], false),
                    beta: Param::new(vec![0.0; width], false),
                    running_mean: vec![0.0; width],
                    running_var: vec![1.0; width],
                    momentum: BN_MOMENTUM,
                    eps: BN_EPS,
                },
                input,
            ),
            LayerSpec::Elu { alpha } => {
                if alpha <= 0.0 {
                    return Err(ModelError::BadParam("ELU alpha must be positive".into()));
                }
                (Layer::Elu { alpha }, input)
            }
            LayerSpec::Relu => (Layer::Relu, input),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(ModelError::BadParam(format!("dropout rate {rate}")));
                }
                (Layer::Dropout { rate }, input)
            }
            LayerSpec::Conv1d { filters, kernel } => {
                if kernel == 0 || kernel > len {
                    return Err(ModelError::InputTooNarrow { width: len, kernel });
                }
                let w = glorot_values(filters * kernel * ch, kernel * ch, kernel * filters, rng);
                (
                    Layer::Conv1d {
                        in_len: len,
                        in_ch: ch,
                        kernel,
                        filters,
                        w: Param::new(w, true),
                        b: Param::new(vec![0.0; filters], false),
                    },
                    (len - kernel + 1, filters),
                )
            }
            LayerSpec::MaxPool { window } => {
                if window == 0 || window > len {
                    return Err(ModelError::ShapeMismatch(format!(
                        "pool window {window} over length {len}"
                    )));
                }
                (
                    Layer::MaxPool {
                        in_len: len,
                        channels: ch,
                        window,
                    },
                    (len / window, ch),
                )
            }
            LayerSpec::Flatten => (Layer::Flatten, (width, 1)),
            LayerSpec::Softmax => (Layer::Softmax, input),
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv1d { w, b, .. } => vec![w, b],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv1d { w, b, .. } => vec![w, b],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub(crate) fn forward(
        &self,
        x: &[f64],
        rows: usize,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> (Vec<f64>, Aux) {
        let width = x.len().checked_div(rows).unwrap_or(0);
        match self {
            Layer::Dense { n_in, n_out, w, b } => {
                let mut out = matmul(x, &w.value, rows, *n_in, *n_out);
                out.par_chunks_mut(*n_out)
                    .for_each(|r| r.iter_mut().zip(&b.value).for_each(|(o, bi)| *o += bi));
                (out, Aux::None)
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                eps,
                ..
            } => {
                let (mean, var, stats) = match mode {
                    Mode::Train => {
                        let (m, v) = column_moments(x, rows, width);
                        (m.clone(), v.clone(), Some((m, v)))
                    }
                    Mode::Eval => (running_mean.clone(), running_var.clone(), None),
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
                let mut xhat = vec![0.0; x.len()];
                let mut out = vec![0.0; x.len()];
                for r in 0..rows {
                    for j in 0..width {
                        let i = r * width + j;
                        xhat[i] = (x[i] - mean[j]) * inv_std[j];
                        out[i] = gamma.value[j] * xhat[i] + beta.value[j];
                    }
                }
                (out, Aux::BatchNorm { xhat, inv_std, stats })
            }
            Layer::Elu { alpha } => (x.iter().map(|&v| elu(v, *alpha)).collect(), Aux::None),
            Layer::Relu => (x.iter().map(|&v| relu(v)).collect(), Aux::None),
            Layer::Dropout { rate } => match (mode, rng) {
                (Mode::Train, Some(rng)) if *rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    let out = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (out, Aux::Mask(mask))
                }
                _ => (x.to_vec(), Aux::None),
            },
            Layer::Conv1d {
                in_len,
                in_ch,
                kernel,
                filters,
                w,
                b,
            } => {
                let out_len = in_len - kernel + 1;
                let span = kernel * in_ch;
                let mut out = vec![0.0; rows * out_len * filters];
                out.par_chunks_mut(out_len * filters)
                    .zip(x.par_chunks(in_len * in_ch))
                    .for_each(|(o, xr)| {
                        for l in 0..out_len {
                            let win = &xr[l * in_ch..l * in_ch + span];
                            for f in 0..*filters {
                                let wf = &w.value[f * span..(f + 1) * span];
                                o[l * filters + f] = b.value[f] + dot(wf, win);
                            }
                        }
                    });
                (out, Aux::None)
            }
            Layer::MaxPool {
                in_len,
                channels,
                window,
            } => {
                let out_len = in_len / window;
                let mut out = vec![0.0; rows * out_len * channels];
                let mut arg = vec![0u32; out.len()];
                for r in 0..rows {
                    let xr = &x[r * in_len * channels..(r + 1) * in_len * channels];
                    for l in 0..out_len {
                        for c in 0..*channels {
                            let mut best = l * window * channels + c;
                            for k in 1..*window {
                                let i = (l * window + k) * channels + c;
                                if xr[i] > xr[best] {
                                    best = i;
                                }
                            }
                            let o = (r * out_len + l) * channels + c;
                            out[o] = xr[best];
                            arg[o] = best as u32;
                        }
                    }
                }
                (out, Aux::Argmax(arg))
            }
            Layer::Flatten => (x.to_vec(), Aux::None),
            Layer::Softmax => {
                let mut out = x.to_vec();
                out.chunks_mut(width.max(1))
                    .for_each(crate::model::softmax_in_place);
                (out, Aux::None)
            }
        }
    }

    /// Accumulates parameter gradients and returns dL/dx. Softmax is not
    /// handled here; the loss supplies the gradient at its input.
    pub(crate) fn backward(&mut self, x: &[f64], aux: &Aux, dy: &[f64], rows: usize) -> Vec<f64> {
        let width = x.len().checked_div(rows).unwrap_or(0);
        match self {
            Layer::Dense { n_in, n_out, w, b } => {
                let dw = matmul_at_b(x, dy, rows, *n_in, *n_out);
                w.grad.iter_mut().zip(&dw).for_each(|(g, d)| *g += d);
                for r in 0..rows {
                    for j in 0..*n_out {
                        b.grad[j] += dy[r * *n_out + j];
                    }
                }
                matmul_a_bt(dy, &w.value, rows, *n_out, *n_in)
            }
            Layer::BatchNorm { gamma, beta, .. } => {
                let Aux::BatchNorm {
                    xhat,
                    inv_std,
                    stats,
                } = aux
                else {
                    unreachable!("batch-norm aux")
                };
                let mut sum_dy = vec![0.0; width];
                let mut sum_dy_xhat = vec![0.0; width];
                for r in 0..rows {
                    for j in 0..width {
                        let i = r * width + j;
                        sum_dy[j] += dy[i];
                        sum_dy_xhat[j] += dy[i] * xhat[i];
                    }
                }
                for j in 0..width {
                    gamma.grad[j] += sum_dy_xhat[j];
                    beta.grad[j] += sum_dy[j];
                }
                let mut dx = vec![0.0; x.len()];
                let n = rows as f64;
                for r in 0..rows {
                    for j in 0..width {
                        let i = r * width + j;
                        let g = gamma.value[j] * inv_std[j];
                        dx[i] = if stats.is_some() {
                            g / n * (n * dy[i] - sum_dy[j] - xhat[i] * sum_dy_xhat[j])
                        } else {
                            g * dy[i]
                        };
                    }
                }
                dx
            }
            Layer::Elu { alpha } => x
                .iter()
                .zip(dy)
                .map(|(&v, d)| d * elu_grad(v, *alpha))
                .collect(),
            Layer::Relu => x.iter().zip(dy).map(|(&v, d)| d * relu_grad(v)).collect(),
            Layer::Dropout { .. } => match aux {
                Aux::Mask(m) => dy.iter().zip(m).map(|(d, m)| d * m).collect(),
                _ => dy.to_vec(),
            },
            Layer::Conv1d {
                in_len,
                in_ch,
                kernel,
                filters,
                w,
                b,
            } => {
                let (in_len, in_ch, filters) = (*in_len, *in_ch, *filters);
                let out_len = in_len - *kernel + 1;
                let span = *kernel * in_ch;
                let row_in = in_len * in_ch;
                let row_out = out_len * filters;
                let wv = &w.value;
                w.grad
                    .par_chunks_mut(span)
                    .zip(b.grad.par_iter_mut())
                    .enumerate()
                    .for_each(|(f, (gw, gb))| {
                        for r in 0..rows {
                            let xr = &x[r * row_in..(r + 1) * row_in];
                            for l in 0..out_len {
                                let d = dy[r * row_out + l * filters + f];
                                if d == 0.0 {
                                    continue;
                                }
                                *gb += d;
                                let win = &xr[l * in_ch..l * in_ch + span];
                                gw.iter_mut().zip(win).for_each(|(g, xv)| *g += d * xv);
                            }
                        }
                    });
                let mut dx = vec![0.0; x.len()];
                dx.par_chunks_mut(row_in)
                    .enumerate()
                    .for_each(|(r, dxr)| {
                        for l in 0..out_len {
                            for f in 0..filters {
                                let d = dy[r * row_out + l * filters + f];
                                if d == 0.0 {
                                    continue;
                                }
                                let wf = &wv[f * span..(f + 1) * span];
                                dxr[l * in_ch..l * in_ch + span]
                                    .iter_mut()
                                    .zip(wf)
                                    .for_each(|(g, wv)| *g += d * wv);
                            }
                        }
                    });
                dx
            }
            Layer::MaxPool {
                in_len, channels, ..
            } => {
                let Aux::Argmax(arg) = aux else {
                    unreachable!("pool aux")
                };
                let row_in = *in_len * *channels;
                let row_out = dy.len().checked_div(rows).unwrap_or(0);
                let mut dx = vec![0.0; x.len()];
                for r in 0..rows {
                    for o in 0..row_out {
                        let i = r * row_out + o;
                        dx[r * row_in + arg[i] as usize] += dy[i];
                    }
                }
                dx
            }
            Layer::Flatten => dy.to_vec(),
            Layer::Softmax => unreachable!("softmax gradient comes from the loss"),
        }
    }

    /// Moves running batch-norm statistics toward the batch statistics.
    pub(crate) fn update_running(&mut self, aux: &Aux) {
        if let (
            Layer::BatchNorm {
                running_mean,
                running_var,
                momentum,
                ..
            },
            Aux::BatchNorm {
                stats: Some((m, v)),
                ..
            },
        ) = (self, aux)
        {
            for j in 0..m.len() {
                running_mean[j] = *momentum * running_mean[j] + (1.0 - *momentum) * m[j];
                running_var[j] = *momentum * running_var[j] + (1.0 - *momentum) * v[j];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Column means and biased variances.
fn column_moments(x: &[f64], rows: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows as f64;
    let mut mean = vec![0.0; width];
    for r in x.chunks(width) {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for r in x.chunks(width) {
        for j in 0..width {
            let d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// `a (m x k) * b (k x n)`.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 0 {
        return out;
    }
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            row.iter_mut()
                .zip(&b[p * n..(p + 1) * n])
                .for_each(|(o, bv)| *o += av * bv);
        }
    });
    debug_assert_eq!(out.len(), m * n);
    out
}

/// `a^T * b` for `a (m x k)` and `b (m x n)`, giving `k x n`.
fn matmul_at_b(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    if n == 0 {
        return out;
    }
    out.par_chunks_mut(n).enumerate().for_each(|(p, row)| {
        for i in 0..m {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            row.iter_mut()
                .zip(&b[i * n..(i + 1) * n])
                .for_each(|(o, bv)| *o += av * bv);
        }
    });
    out
}

/// `a * b^T` for `a (m x n)` and `b (k x n)`, giving `m x k`.
fn matmul_a_bt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    if k == 0 {
        return out;
    }
    out.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
        let ai = &a[i * n..(i + 1) * n];
        for (p, o) in row.iter_mut().enumerate() {
            *o = dot(ai, &b[p * n..(p + 1) * n]);
        }
    });
    out
}

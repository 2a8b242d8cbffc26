//! Scalar and vector building blocks: activations, softmax, loss,
//! elastic-net penalty and Glorot initialization.

use rand::Rng as _;

use crate::model::{softmax_in_place, ModelError};
use crate::rng::Rng;
use crate::Matrix;

/// Probabilities below this are floored before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// 1 for positive inputs, 0 otherwise (including exactly 0).
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

pub fn elu_grad(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha * x.exp()
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut p = z.to_vec();
    softmax_in_place(&mut p);
    p
}

/// Vector-Jacobian product of softmax: dL/dz given p and dL/dp.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - s)).collect()
}

fn one_hot_class(y: &[f64]) -> Result<usize, ModelError> {
    let mut hot = None;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return Err(ModelError::BadOneHot);
        }
    }
    hot.ok_or(ModelError::BadOneHot)
}

pub fn categorical_cross_entropy(p: &[f64], y: &[f64]) -> Result<f64, ModelError> {
    if p.len() != y.len() {
        return Err(ModelError::BadOneHot);
    }
    let c = one_hot_class(y)?;
    Ok(-p[c].max(PROB_FLOOR).ln())
}

/// dL/dp of the cross-entropy for a one-hot target.
pub fn cce_grad(p: &[f64], y: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(y)
        .map(|(pi, yi)| -yi / pi.max(PROB_FLOOR))
        .collect()
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn elastic_net_penalty(weights: &[&[f64]], l1: f64, l2: f64) -> f64 {
    weights
        .iter()
        .flat_map(|w| w.iter())
        .map(|&w| l1 * w.abs() + l2 * w * w)
        .sum()
}

/// Adds the penalty gradient of `w` into `grad`.
pub fn elastic_net_grad(w: &[f64], l1: f64, l2: f64, grad: &mut [f64]) {
    for (g, &v) in grad.iter_mut().zip(w) {
        *g += l1 * sign(v) + 2.0 * l2 * v;
    }
}

pub fn glorot_bound(n_in: usize, n_out: usize) -> f64 {
    6f64.sqrt() / ((n_in + n_out) as f64).sqrt()
}

/// Draws uniformly from the open interval (-bound, bound).
pub fn glorot_values(count: usize, n_in: usize, n_out: usize, rng: &mut Rng) -> Vec<f64> {
    let b = glorot_bound(n_in, n_out);
    (0..count)
        .map(|_| loop {
            let v = rng.random_range(-b..b);
            if v != -b {
                break v;
            }
        })
        .collect()
}

pub fn glorot_uniform(n_in: usize, n_out: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(n_in, n_out, glorot_values(n_in * n_out, n_in, n_out, rng))
}

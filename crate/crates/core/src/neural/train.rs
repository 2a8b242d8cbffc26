//! Mini-batch Adam training with early stopping, and a finite-difference
//! gradient check.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::network::{Network, NetworkSpec};
use crate::model::{check_labels, check_width, ModelError};
use crate::rng::{derive_seed, seeded};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            max_epochs: 50,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochRecord>,
    /// Epoch number (from 1) with the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainingCurve {
    pub fn stopped_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.val_accuracy
            ));
        }
        s
    }
}

fn adam_step(net: &mut Network, p: &TrainParams, t: u64) {
    let c1 = 1.0 - p.beta1.powi(t as i32);
    let c2 = 1.0 - p.beta2.powi(t as i32);
    for layer in &mut net.layers {
        for param in layer.params_mut() {
            for i in 0..param.value.len() {
                let g = param.grad[i];
                param.m[i] = p.beta1 * param.m[i] + (1.0 - p.beta1) * g;
                param.v[i] = p.beta2 * param.v[i] + (1.0 - p.beta2) * g * g;
                let mh = param.m[i] / c1;
                let vh = param.v[i] / c2;
                param.value[i] -= p.learning_rate * mh / (vh.sqrt() + p.epsilon);
            }
        }
    }
}

/// Trains a fresh network built from `spec`. Parameters come from
/// `derive_seed(seed, [0])`; batch order and dropout masks from
/// `derive_seed(seed, [1])`. The returned network holds the parameters of
/// the epoch with the lowest validation loss.
pub fn train_network(
    spec: &NetworkSpec,
    x: &Matrix,
    y: &[usize],
    x_val: &Matrix,
    y_val: &[usize],
    params: &TrainParams,
    seed: u64,
) -> Result<(Network, TrainingCurve), ModelError> {
    let shape_err = |e: ModelError| match e {
        ModelError::WidthMismatch { expected, found } => {
            ModelError::ShapeMismatch(format!("expected width {expected}, found {found}"))
        }
        e => e,
    };
    check_labels(x, y, spec.n_classes)?;
    if x_val.rows() == 0 {
        return Err(ModelError::EmptyValidation);
    }
    check_labels(x_val, y_val, spec.n_classes)?;
    check_width(spec.input_width, x).map_err(shape_err)?;
    check_width(spec.input_width, x_val).map_err(shape_err)?;
    if params.batch_size == 0 || params.learning_rate < 0.0 {
        return Err(ModelError::BadParam("batch_size must be positive and learning_rate >= 0".into()));
    }
    let mut net = Network::new(spec, derive_seed(seed, &[0]))?;
    net.zero_grads();
    let mut rng = seeded(derive_seed(seed, &[1]));
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut curve = TrainingCurve::default();
    let mut best: Option<(f64, Network)> = None;
    let mut t = 0u64;
    let width = x.cols();
    let mut batch = Vec::with_capacity(params.batch_size * width);
    let mut labels = Vec::with_capacity(params.batch_size);
    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(params.batch_size) {
            batch.clear();
            labels.clear();
            for &i in idx {
                batch.extend_from_slice(x.row(i));
                labels.push(y[i]);
            }
            let loss = net.loss_and_grad(&batch, &labels, Mode::Train, Some(&mut rng));
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            total += loss * idx.len() as f64;
            t += 1;
            adam_step(&mut net, params, t);
        }
        let (val_loss, val_accuracy) = net.evaluate(x_val, y_val)?;
        if !val_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        curve.epochs.push(EpochRecord {
            epoch,
            train_loss: total / x.rows() as f64,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            curve.best_epoch = epoch;
        }
        if epoch - curve.best_epoch >= params.patience.max(1) {
            break;
        }
    }
    let net = best.map_or(net, |(_, n)| n);
    Ok((net, curve))
}

/// Largest relative difference between analytic gradients and central
/// differences with step `h`, over every parameter. Runs in evaluation
/// mode, so dropout is off and batch-norm uses its stored statistics.
pub fn grad_check(net: &Network, x: &Matrix, y: &[usize], h: f64) -> Result<f64, ModelError> {
    check_labels(x, y, net.spec.n_classes)?;
    check_width(net.spec.input_width, x)?;
    let mut work = net.clone();
    work.loss_and_grad(x.as_slice(), y, Mode::Eval, None);
    let analytic: Vec<Vec<f64>> = work
        .layers
        .iter()
        .flat_map(|l| l.params())
        .map(|p| p.grad.clone())
        .collect();
    let mut worst = 0.0f64;
    let mut k = 0;
    for li in 0..work.layers.len() {
        let n_params = work.layers[li].params().len();
        for pi in 0..n_params {
            for (i, &a) in analytic[k].iter().enumerate() {
                let orig = work.layers[li].params()[pi].value[i];
                work.layers[li].params_mut()[pi].value[i] = orig + h;
                let (up, _) = work.evaluate(x, y)?;
                work.layers[li].params_mut()[pi].value[i] = orig - h;
                let (down, _) = work.evaluate(x, y)?;
                work.layers[li].params_mut()[pi].value[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                // the floor only guards 0/0 when both gradients vanish
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
                worst = worst.max(rel);
            }
            k += 1;
        }
    }
    Ok(worst)
}

//! Common prediction contract shared by every trained classifier.

use thiserror::Error;

use crate::Matrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training input is empty")]
    EmptyInput,
    #[error("feature width mismatch: model expects {expected}, input has {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("labels and rows disagree: {rows} rows, {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} outside 0..{classes}")]
    BadLabel { label: usize, classes: usize },
    #[error("sample weights must be non-negative and not all zero")]
    BadWeights,
    #[error("early stopping needs a non-empty validation set")]
    EmptyValidation,
    #[error("k = {k} must lie in 1..={rows}")]
    BadK { k: usize, rows: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("input width {width} is narrower than kernel width {kernel}")]
    InputTooNarrow { width: usize, kernel: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("target vector is not one-hot")]
    BadOneHot,
    #[error("ensemble members disagree on {0}")]
    SchemaMismatch(String),
    #[error("bad hyperparameter: {0}")]
    BadParam(String),
}

/// Anything that maps feature rows to class indices.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError>;

    /// Per-class probabilities (or vote shares), one row per input row.
    fn predict_proba(&self, _x: &Matrix) -> Result<Option<Matrix>, ModelError> {
        Ok(None)
    }
}

pub(crate) fn check_width(expected: usize, x: &Matrix) -> Result<(), ModelError> {
    if x.cols() != expected {
        return Err(ModelError::WidthMismatch {
            expected,
            found: x.cols(),
        });
    }
    Ok(())
}

pub(crate) fn check_labels(x: &Matrix, y: &[usize], classes: usize) -> Result<(), ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(ModelError::BadLabel { label, classes });
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> f64 {
    if y_true.is_empty() {
        return 0.0;
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    hits as f64 / y_true.len() as f64
}

/// Softmax with max-subtraction, overwriting `z` with probabilities.
pub fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

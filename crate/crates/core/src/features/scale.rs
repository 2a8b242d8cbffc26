use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

/// Per-column minimum and maximum, together with the partition they were
/// fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    pub columns: Vec<ColumnRange>,
    pub fitted_on: String,
}

pub const TRAIN_PARTITION: &str = "train";

impl MinMaxParams {
    pub fn fit(matrix: &Matrix, fitted_on: &str) -> Self {
        let mut columns = vec![
            ColumnRange {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            matrix.cols()
        ];
        for row in matrix.iter_rows() {
            for (range, &v) in columns.iter_mut().zip(row) {
                range.min = range.min.min(v);
                range.max = range.max.max(v);
            }
        }
        if matrix.rows() == 0 {
            columns.iter_mut().for_each(|r| *r = ColumnRange { min: 0.0, max: 0.0 });
        }
        Self {
            columns,
            fitted_on: fitted_on.to_string(),
        }
    }

    pub fn scale(&self, col: usize, x: f64) -> f64 {
        let ColumnRange { min, max } = self.columns[col];
        if max == min {
            return 0.0;
        }
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    }

    pub fn transform(&self, matrix: &Matrix) -> Result<Matrix, FeatureError> {
        if matrix.cols() != self.columns.len() {
            return Err(FeatureError::ColumnMismatch {
                expected: self.columns.len(),
                found: matrix.cols(),
            });
        }
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.scale(c, *v);
            }
        }
        Ok(out)
    }
}

/// Fits scaling parameters on the training partition.
pub fn fit_min_max(train: &Matrix) -> MinMaxParams {
    MinMaxParams::fit(train, TRAIN_PARTITION)
}

/// `(x - min) / (max - min)`, 0 for constant columns, clamped to `[0, 1]`.
pub fn transform_min_max(params: &MinMaxParams, matrix: &Matrix) -> Result<Matrix, FeatureError> {
    params.transform(matrix)
}

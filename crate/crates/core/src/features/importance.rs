//! Permutation importance: accuracy lost when one column is shuffled.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{accuracy, Classifier, ModelError};
use crate::rng;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean: f64,
    pub per_repeat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub base_accuracy: f64,
    pub repeats: usize,
    pub seed: u64,
    pub features: Vec<FeatureImportance>,
}

pub const DEFAULT_REPEATS: usize = 5;

/// Row order used to shuffle column `feature` on repeat `repeat`.
pub fn shuffle_order(rows: usize, seed: u64, feature: usize, repeat: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = rng::seeded(rng::derive_seed(seed, &[feature as u64, repeat as u64]));
    order.shuffle(&mut rng);
    order
}

/// Mean accuracy decrease per feature over `repeats` seeded shuffles.
/// Negative values mean the shuffled column scored better than the original.
pub fn permutation_importance<M: Classifier + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[usize],
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ModelError> {
    if repeats == 0 {
        return Err(ModelError::BadParam("repeats must be at least 1".into()));
    }
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if names.len() != x.cols() {
        return Err(ModelError::WidthMismatch {
            expected: names.len(),
            found: x.cols(),
        });
    }
    let base = accuracy(y, &model.predict(x)?);
    let features = (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let original = x.column(j);
            let per_repeat = (0..repeats)
                .map(|r| {
                    let order = shuffle_order(x.rows(), seed, j, r);
                    let shuffled: Vec<f64> = order.iter().map(|&i| original[i]).collect();
                    let mut xs = x.clone();
                    xs.set_column(j, &shuffled);
                    Ok(base - accuracy(y, &model.predict(&xs)?))
                })
                .collect::<Result<Vec<f64>, ModelError>>()?;
            Ok(FeatureImportance {
                feature: names[j].clone(),
                mean: per_repeat.iter().sum::<f64>() / repeats as f64,
                per_repeat,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(ImportanceReport {
        base_accuracy: base,
        repeats,
        seed,
        features,
    })
}

impl ImportanceReport {
    /// CSV with header `feature,mean_importance,repeat_values`; repeat
    /// values are joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean_importance,repeat_values\n");
        for f in &self.features {
            let reps: Vec<String> = f.per_repeat.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{},{}", f.feature, f.mean, reps.join(";"));
        }
        out
    }
}

//! Multiclass AdaBoost (SAMME) over shallow trees.

use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on_sample, ColumnOrder, DecisionTree, TreeParams};
use crate::model::{argmax, check_labels, check_width, Classifier, ModelError};
use crate::Matrix;

/// Floor applied to a zero weighted error before computing the stage weight.
pub const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaParams {
    pub n_rounds: usize,
    pub weak_depth: usize,
}

impl Default for AdaParams {
    fn default() -> Self {
        Self {
            n_rounds: 50,
            weak_depth: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaStage {
    pub tree: DecisionTree,
    pub alpha: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaModel {
    pub stages: Vec<AdaStage>,
    pub n_features: usize,
    pub n_classes: usize,
    /// Weighted-majority class, predicted when no stage was kept.
    pub fallback_class: usize,
}

/// Sample weights at the start of every round, plus the final weights.
#[derive(Debug, Clone, Default)]
pub struct AdaTrace {
    pub weights: Vec<Vec<f64>>,
}

pub fn fit_adaboost(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &AdaParams,
) -> Result<AdaModel, ModelError> {
    fit_adaboost_traced(x, y, n_classes, params).map(|(m, _)| m)
}

pub fn fit_adaboost_traced(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &AdaParams,
) -> Result<(AdaModel, AdaTrace), ModelError> {
    check_labels(x, y, n_classes)?;
    if n_classes < 2 {
        return Err(ModelError::SingleClass);
    }
    let n = x.rows();
    let k = n_classes as f64;
    let tree_params = TreeParams {
        max_depth: Some(params.weak_depth),
        min_samples_leaf: 1,
        features_per_split: None,
    };
    let order = ColumnOrder::new(x);
    let sample: Vec<usize> = (0..n).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut trace = AdaTrace::default();
    let mut stages = Vec::new();
    let mut prior = vec![0.0; n_classes];
    for &c in y {
        prior[c] += 1.0;
    }
    for _ in 0..params.n_rounds {
        trace.weights.push(w.clone());
        let tree = fit_tree_on_sample(
            x,
            y,
            Some(&w),
            n_classes,
            &tree_params,
            &sample,
            Some(&order),
            None,
        )?;
        let pred: Vec<usize> = x.iter_rows().map(|r| tree.predict_class(r)).collect();
        let total: f64 = w.iter().sum();
        let miss: f64 = (0..n).filter(|&i| pred[i] != y[i]).map(|i| w[i]).sum();
        let error = miss / total;
        if error >= 1.0 - 1.0 / k - 1e-12 {
            break;
        }
        let e = error.max(MIN_ERROR);
        let alpha = ((1.0 - e) / e).ln() + (k - 1.0).ln();
        stages.push(AdaStage { tree, alpha, error });
        if error <= 0.0 {
            break;
        }
        let scale = alpha.exp();
        for i in 0..n {
            if pred[i] != y[i] {
                w[i] *= scale;
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
    }
    trace.weights.push(w);
    Ok((
        AdaModel {
            stages,
            n_features: x.cols(),
            n_classes,
            fallback_class: argmax(&prior),
        },
        trace,
    ))
}

impl AdaModel {
    /// Sum of stage weights voting for each class.
    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n_classes];
        for st in &self.stages {
            s[st.tree.predict_class(row)] += st.alpha;
        }
        s
    }
}

impl Classifier for AdaModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        check_width(self.n_features, x)?;
        if self.stages.is_empty() {
            return Ok(vec![self.fallback_class; x.rows()]);
        }
        Ok(x.iter_rows().map(|r| argmax(&self.class_scores(r))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_tracked_two_rounds() {
        // Four points on a line, labels 0 0 1 0. The first stump splits at
        // 1.5 or 2.5; either way one row is misclassified.
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
        let y = [0, 0, 1, 0];
        let params = AdaParams {
            n_rounds: 2,
            weak_depth: 1,
        };
        let (m, trace) = fit_adaboost_traced(&x, &y, 2, &params).unwrap();
        let s0 = &m.stages[0];
        assert!((s0.error - 0.25).abs() < 1e-15);
        assert!((s0.alpha - 3f64.ln()).abs() < 1e-12);
        let w1 = &trace.weights[1];
        // Misclassified row carries 3/6, the others 1/6 each.
        let heavy = w1.iter().cloned().fold(0.0, f64::max);
        assert!((heavy - 0.5).abs() < 1e-12);
        assert_eq!(w1.iter().filter(|v| (**v - 1.0 / 6.0).abs() < 1e-12).count(), 3);
    }

    #[test]
    fn weights_stay_normalized() {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| [(i % 5) as f64, ((i * 7) % 11) as f64])
            .collect();
        let y: Vec<usize> = (0..40).map(|i| (i * 3 % 7) % 3).collect();
        let x = Matrix::from_rows(&rows);
        let (_, trace) = fit_adaboost_traced(&x, &y, 3, &AdaParams::default()).unwrap();
        for w in &trace.weights {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_stump_stops_early() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
        let y = [0, 0, 1, 1];
        let m = fit_adaboost(&x, &y, 2, &AdaParams::default()).unwrap();
        assert_eq!(m.stages.len(), 1);
        assert!(m.stages[0].alpha.is_finite());
        assert_eq!(m.predict(&x).unwrap(), y.to_vec());
    }

    #[test]
    fn no_stage_falls_back_to_majority() {
        // Identical rows: every stump is a single leaf and errs on 1/3 of
        // the weight, which is not better than chance for three classes.
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]);
        let m = fit_adaboost(&x, &[2, 1, 0], 3, &AdaParams::default()).unwrap();
        assert!(m.stages.is_empty());
        assert_eq!(m.predict(&x).unwrap(), vec![0, 0, 0]);
    }
}

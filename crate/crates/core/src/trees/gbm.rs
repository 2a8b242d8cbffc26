//! Gradient-boosted trees with a softmax objective and Newton leaf values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_regression_tree, ColumnOrder, DecisionTree, TreeParams};
use crate::model::{argmax, check_labels, check_width, softmax_in_place, Classifier, ModelError};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub max_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty added to the hessian sum of every leaf.
    pub lambda: f64,
    pub patience: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            patience: 10,
            min_samples_leaf: 1,
        }
    }
}

/// Loss after each round; index 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainCurve {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_round: usize,
}

impl TrainCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,train_loss,val_loss\n");
        for (r, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            s.push_str(&format!("{r},{t},{v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    /// One tree per class for every kept round.
    pub rounds: Vec<Vec<DecisionTree>>,
    pub learning_rate: f64,
    pub n_features: usize,
    pub n_classes: usize,
}

/// Mean cross-entropy of softmax(scores) against `y`.
pub fn softmax_loss(scores: &Matrix, y: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut p = vec![0.0; scores.cols()];
    for (row, &c) in scores.iter_rows().zip(y) {
        p.copy_from_slice(row);
        softmax_in_place(&mut p);
        total -= p[c].max(f64::MIN_POSITIVE).ln();
    }
    total / y.len().max(1) as f64
}

/// Newton step for one leaf, zero when the denominator vanishes.
pub fn newton_leaf(g: &[f64], h: &[f64], rows: &[usize], lambda: f64) -> f64 {
    let gs: f64 = rows.iter().map(|&r| g[r]).sum();
    let hs: f64 = rows.iter().map(|&r| h[r]).sum();
    let den = hs + lambda;
    if den <= 1e-12 {
        0.0
    } else {
        -gs / den
    }
}

fn add_round(scores: &mut Matrix, x: &Matrix, trees: &[DecisionTree], eta: f64) {
    for i in 0..x.rows() {
        let row = x.row(i);
        for (k, t) in trees.iter().enumerate() {
            let v = scores.get(i, k) + eta * t.predict_score(row);
            scores.set(i, k, v);
        }
    }
}

/// Trains up to `max_rounds` rounds, stopping once the validation loss has
/// not improved for `patience` rounds. The returned model keeps only the
/// rounds up to the best validation loss.
pub fn fit_gbm(
    x: &Matrix,
    y: &[usize],
    x_val: &Matrix,
    y_val: &[usize],
    n_classes: usize,
    params: &GbmParams,
) -> Result<(GbmModel, TrainCurve), ModelError> {
    check_labels(x, y, n_classes)?;
    if x_val.rows() == 0 {
        return Err(ModelError::EmptyValidation);
    }
    check_labels(x_val, y_val, n_classes)?;
    check_width(x.cols(), x_val)?;
    if !(params.learning_rate >= 0.0 && params.lambda >= 0.0) {
        return Err(ModelError::BadParam("learning_rate and lambda must be >= 0".into()));
    }
    let n = x.rows();
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: None,
    };
    let order = ColumnOrder::new(x);
    let mut f_train = Matrix::zeros(n, n_classes);
    let mut f_val = Matrix::zeros(x_val.rows(), n_classes);
    let mut curve = TrainCurve {
        train_loss: vec![softmax_loss(&f_train, y)],
        val_loss: vec![softmax_loss(&f_val, y_val)],
        best_round: 0,
    };
    let mut rounds: Vec<Vec<DecisionTree>> = Vec::new();
    let mut p = Matrix::zeros(n, n_classes);
    for r in 1..=params.max_rounds {
        for i in 0..n {
            let dst = p.row_mut(i);
            dst.copy_from_slice(f_train.row(i));
            softmax_in_place(dst);
        }
        let trees = (0..n_classes)
            .into_par_iter()
            .map(|k| {
                let g: Vec<f64> = (0..n)
                    .map(|i| p.get(i, k) - f64::from(u8::from(y[i] == k)))
                    .collect();
                let h: Vec<f64> = (0..n).map(|i| p.get(i, k) * (1.0 - p.get(i, k))).collect();
                let target: Vec<f64> = g.iter().map(|v| -v).collect();
                let leaf = |rows: &[usize]| newton_leaf(&g, &h, rows, params.lambda);
                fit_regression_tree(x, &target, &tree_params, Some(&order), &leaf)
            })
            .collect::<Result<Vec<_>, _>>()?;
        add_round(&mut f_train, x, &trees, params.learning_rate);
        add_round(&mut f_val, x_val, &trees, params.learning_rate);
        rounds.push(trees);
        let tl = softmax_loss(&f_train, y);
        let vl = softmax_loss(&f_val, y_val);
        if !tl.is_finite() || !vl.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch: r });
        }
        curve.train_loss.push(tl);
        curve.val_loss.push(vl);
        if vl < curve.val_loss[curve.best_round] {
            curve.best_round = r;
        }
        if r - curve.best_round >= params.patience.max(1) {
            break;
        }
    }
    rounds.truncate(curve.best_round);
    Ok((
        GbmModel {
            rounds,
            learning_rate: params.learning_rate,
            n_features: x.cols(),
            n_classes,
        },
        curve,
    ))
}

impl GbmModel {
    pub fn raw_scores(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        check_width(self.n_features, x)?;
        let mut f = Matrix::zeros(x.rows(), self.n_classes);
        for trees in &self.rounds {
            add_round(&mut f, x, trees, self.learning_rate);
        }
        Ok(f)
    }
}

impl Classifier for GbmModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        let f = self.raw_scores(x)?;
        Ok(f.iter_rows().map(argmax).collect())
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Option<Matrix>, ModelError> {
        let mut f = self.raw_scores(x)?;
        for i in 0..f.rows() {
            softmax_in_place(f.row_mut(i));
        }
        Ok(Some(f))
    }
}

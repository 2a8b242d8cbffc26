//! Bagged random forest with hard-vote aggregation.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on_sample, ColumnOrder, DecisionTree, TreeParams};
use crate::model::{argmax, check_labels, check_width, Classifier, ModelError};
use crate::rng::{derive_seed, seeded};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub tree_seeds: Vec<u64>,
    pub features_per_split: usize,
    pub n_features: usize,
    pub n_classes: usize,
}

pub fn default_features_per_split(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
}

pub fn fit_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ModelError> {
    check_labels(x, y, n_classes)?;
    if params.n_trees == 0 {
        return Err(ModelError::BadParam("n_trees must be positive".into()));
    }
    let d = x.cols();
    let m = params
        .features_per_split
        .unwrap_or_else(|| default_features_per_split(d))
        .clamp(1, d.max(1));
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: Some(m),
    };
    let order = ColumnOrder::new(x);
    let n = x.rows();
    let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
        .map(|t| derive_seed(seed, &[t]))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = seeded(s);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on_sample(
                x,
                y,
                None,
                n_classes,
                &tree_params,
                &sample,
                Some(&order),
                Some(&mut rng),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel {
        trees,
        tree_seeds,
        features_per_split: m,
        n_features: d,
        n_classes,
    })
}

impl ForestModel {
    /// Fraction of trees voting for each class, one row per input row.
    pub fn vote_shares(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        check_width(self.n_features, x)?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let share = 1.0 / self.trees.len() as f64;
        for (i, row) in x.iter_rows().enumerate() {
            let dst = out.row_mut(i);
            for t in &self.trees {
                dst[t.predict_class(row)] += share;
            }
        }
        Ok(out)
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        let shares = self.vote_shares(x)?;
        Ok(shares.iter_rows().map(argmax).collect())
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Option<Matrix>, ModelError> {
        self.vote_shares(x).map(Some)
    }
}

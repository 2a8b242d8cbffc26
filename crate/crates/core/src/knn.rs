//! Brute-force k-nearest-neighbor classifier over Euclidean distance.
//!
//! The k nearest stored rows are taken with distance ties going to the
//! lower stored index. The predicted label is the majority among them;
//! a tied majority goes to the class with the smaller summed distance,
//! then to the lower class index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{check_labels, check_width, Classifier, ModelError};
use crate::Matrix;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

pub fn fit_knn(x: &Matrix, y: &[usize], n_classes: usize, k: usize) -> Result<KnnModel, ModelError> {
    check_labels(x, y, n_classes)?;
    if k == 0 || k > x.rows() {
        return Err(ModelError::BadK { k, rows: x.rows() });
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k,
        n_classes,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

impl KnnModel {
    /// The k nearest stored rows as `(distance, index)`, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (euclidean(query, r), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    pub fn predict_row(&self, query: &[f64]) -> usize {
        let mut count = vec![0usize; self.n_classes];
        let mut dist = vec![0.0; self.n_classes];
        for (d, i) in self.neighbors(query) {
            count[self.y[i]] += 1;
            dist[self.y[i]] += d;
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if count[c] > count[best] || (count[c] == count[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.x.cols()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        check_width(self.x.cols(), x)?;
        let rows: Vec<&[f64]> = x.iter_rows().collect();
        Ok(rows.par_iter().map(|r| self.predict_row(r)).collect())
    }
}

//! CART-style decision tree grown greedily from presorted columns.
//!
//! Classification splits maximize weighted Gini gain, regression splits
//! maximize weighted squared-error reduction. Candidate thresholds are
//! midpoints between consecutive distinct values; a row goes left when
//! `x[feature] <= threshold`. Gains within [`TIE_TOLERANCE`] (relative) of
//! each other are ties, broken by the lower feature index and then the
//! lower threshold.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::{argmax, check_labels, check_width, Classifier, ModelError};
use crate::rng::Rng;
use crate::Matrix;

pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or no split has positive gain.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features drawn per split; `None` uses every feature.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    /// Weighted class counts of the training rows reaching the leaf.
    Counts(Vec<f64>),
    Score(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(LeafValue),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    /// Zero for regression trees.
    pub n_classes: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl DecisionTree {
    pub fn leaf(&self, row: &[f64]) -> &LeafValue {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(v) => return v,
            }
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> usize {
        match self.leaf(row) {
            LeafValue::Counts(c) => argmax(c),
            LeafValue::Score(s) => usize::from(*s > 0.0),
        }
    }

    pub fn predict_score(&self, row: &[f64]) -> f64 {
        match self.leaf(row) {
            LeafValue::Score(s) => *s,
            LeafValue::Counts(c) => argmax(c) as f64,
        }
    }

    /// `(feature, threshold)` of the root, or `None` for a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf(_) => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf(_) => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }
}

impl Classifier for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        check_width(self.n_features, x)?;
        Ok(x.iter_rows().map(|r| self.predict_class(r)).collect())
    }
}

/// Row order of every column, ascending by value then row index. Computed
/// once per matrix and shared by every tree grown on it.
#[derive(Debug, Clone)]
pub struct ColumnOrder {
    orders: Vec<Vec<u32>>,
}

impl ColumnOrder {
    pub fn new(x: &Matrix) -> Self {
        let orders = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, f)
                        .total_cmp(&x.get(b as usize, f))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { orders }
    }

    /// Per-feature orders of sample positions, where `sample[p]` is the row
    /// of position `p` (rows may repeat).
    fn for_sample(&self, n_rows: usize, sample: &[usize]) -> Vec<Vec<u32>> {
        let mut start = vec![0u32; n_rows + 1];
        for &r in sample {
            start[r + 1] += 1;
        }
        for i in 0..n_rows {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut positions = vec![0u32; sample.len()];
        for (p, &r) in sample.iter().enumerate() {
            positions[fill[r] as usize] = p as u32;
            fill[r] += 1;
        }
        self.orders
            .iter()
            .map(|order| {
                let mut out = Vec::with_capacity(sample.len());
                for &r in order {
                    let r = r as usize;
                    out.extend_from_slice(&positions[start[r] as usize..start[r + 1] as usize]);
                }
                out
            })
            .collect()
    }
}

enum Target<'a> {
    Classes {
        y: Vec<usize>,
        n_classes: usize,
    },
    Regression {
        t: Vec<f64>,
        leaf: &'a dyn Fn(&[usize]) -> f64,
    },
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        let Some(o) = other else { return true };
        let tol = TIE_TOLERANCE * (1.0 + o.gain.abs().max(self.gain.abs()));
        if self.gain > o.gain + tol {
            return true;
        }
        if self.gain < o.gain - tol {
            return false;
        }
        if self.feature != o.feature {
            return self.feature < o.feature;
        }
        self.threshold < o.threshold
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    rows: &'a [usize],
    weights: Vec<f64>,
    target: Target<'a>,
    params: &'a TreeParams,
    orders: Vec<Vec<u32>>,
    go_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
    rng: Option<&'a mut Rng>,
}

fn class_score(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    counts.iter().map(|c| c * c).sum::<f64>() / total
}

impl Grower<'_> {
    fn node_score(&self, lo: usize, hi: usize) -> f64 {
        let positions = &self.orders[0][lo..hi];
        match &self.target {
            Target::Classes { y, n_classes } => {
                let mut counts = vec![0.0; *n_classes];
                let mut total = 0.0;
                for &p in positions {
                    let w = self.weights[p as usize];
                    counts[y[p as usize]] += w;
                    total += w;
                }
                class_score(&counts, total)
            }
            Target::Regression { t, .. } => {
                let (mut s, mut w) = (0.0, 0.0);
                for &p in positions {
                    let wp = self.weights[p as usize];
                    s += wp * t[p as usize];
                    w += wp;
                }
                if w > 0.0 {
                    s * s / w
                } else {
                    0.0
                }
            }
        }
    }

    fn best_for_feature(&self, f: usize, lo: usize, hi: usize, parent: f64) -> Option<Candidate> {
        let order = &self.orders[f][lo..hi];
        let n = order.len();
        let msl = self.params.min_samples_leaf.max(1);
        let x = |p: u32| self.x.get(self.rows[p as usize], f);
        let mut best: Option<Candidate> = None;
        let consider = |i: usize, score: f64, best: &mut Option<Candidate>| {
            let a = x(order[i]);
            let b = x(order[i + 1]);
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            let cand = Candidate {
                gain: score - parent,
                feature: f,
                threshold,
            };
            if cand.beats(best) {
                *best = Some(cand);
            }
        };
        match &self.target {
            Target::Classes { y, n_classes } => {
                let mut total = vec![0.0; *n_classes];
                let mut w_total = 0.0;
                for &p in order {
                    let w = self.weights[p as usize];
                    total[y[p as usize]] += w;
                    w_total += w;
                }
                let mut left = vec![0.0; *n_classes];
                let mut right = vec![0.0; *n_classes];
                let mut w_left = 0.0;
                for i in 0..n - 1 {
                    let p = order[i] as usize;
                    left[y[p]] += self.weights[p];
                    w_left += self.weights[p];
                    if i + 1 < msl || n - i - 1 < msl || x(order[i]) == x(order[i + 1]) {
                        continue;
                    }
                    for c in 0..*n_classes {
                        right[c] = total[c] - left[c];
                    }
                    let score =
                        class_score(&left, w_left) + class_score(&right, w_total - w_left);
                    consider(i, score, &mut best);
                }
            }
            Target::Regression { t, .. } => {
                let (mut s_total, mut w_total) = (0.0, 0.0);
                for &p in order {
                    let w = self.weights[p as usize];
                    s_total += w * t[p as usize];
                    w_total += w;
                }
                let (mut s_left, mut w_left) = (0.0, 0.0);
                for i in 0..n - 1 {
                    let p = order[i] as usize;
                    s_left += self.weights[p] * t[p];
                    w_left += self.weights[p];
                    if i + 1 < msl || n - i - 1 < msl || x(order[i]) == x(order[i + 1]) {
                        continue;
                    }
                    let (s_right, w_right) = (s_total - s_left, w_total - w_left);
                    let mut score = 0.0;
                    if w_left > 0.0 {
                        score += s_left * s_left / w_left;
                    }
                    if w_right > 0.0 {
                        score += s_right * s_right / w_right;
                    }
                    consider(i, score, &mut best);
                }
            }
        }
        best
    }

    fn leaf_value(&self, lo: usize, hi: usize) -> LeafValue {
        let positions = &self.orders[0][lo..hi];
        match &self.target {
            Target::Classes { y, n_classes } => {
                let mut counts = vec![0.0; *n_classes];
                for &p in positions {
                    counts[y[p as usize]] += self.weights[p as usize];
                }
                LeafValue::Counts(counts)
            }
            Target::Regression { leaf, .. } => {
                let mut rows: Vec<usize> =
                    positions.iter().map(|&p| self.rows[p as usize]).collect();
                rows.sort_unstable();
                LeafValue::Score(leaf(&rows))
            }
        }
    }

    fn find_split(&mut self, lo: usize, hi: usize) -> Option<Candidate> {
        let d = self.x.cols();
        let parent = self.node_score(lo, hi);
        let positive = |c: &Option<Candidate>| {
            c.is_some_and(|c| c.gain > TIE_TOLERANCE * (1.0 + parent.abs()))
        };
        let mut best: Option<Candidate> = None;
        let take = self.params.features_per_split.map_or(d, |m| m.clamp(1, d));
        let features: Vec<usize> = match (take < d, self.rng.as_deref_mut()) {
            (true, Some(rng)) => {
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(rng);
                all
            }
            _ => (0..d).collect(),
        };
        for (i, &f) in features.iter().enumerate() {
            if i >= take && positive(&best) {
                break;
            }
            if let Some(c) = self.best_for_feature(f, lo, hi, parent) {
                if c.beats(&best) {
                    best = Some(c);
                }
            }
        }
        best.filter(|_| positive(&best))
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(LeafValue::Score(0.0)));
        let can_split = self.params.max_depth.is_none_or(|m| depth < m)
            && hi - lo >= 2 * self.params.min_samples_leaf.max(1);
        let split = if can_split { self.find_split(lo, hi) } else { None };
        let Some(split) = split else {
            self.nodes[id] = Node::Leaf(self.leaf_value(lo, hi));
            return id;
        };
        let mut n_left = 0;
        for &p in &self.orders[split.feature][lo..hi] {
            let goes = self.x.get(self.rows[p as usize], split.feature) <= split.threshold;
            self.go_left[p as usize] = goes;
            n_left += usize::from(goes);
        }
        for f in 0..self.orders.len() {
            let range = &mut self.orders[f][lo..hi];
            self.scratch.clear();
            let mut write = 0;
            for i in 0..range.len() {
                let p = range[i];
                if self.go_left[p as usize] {
                    range[write] = p;
                    write += 1;
                } else {
                    self.scratch.push(p);
                }
            }
            range[write..].copy_from_slice(&self.scratch);
        }
        let left = self.grow(lo, lo + n_left, depth + 1);
        let right = self.grow(lo + n_left, hi, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

#[allow(clippy::too_many_arguments)]
fn grow_tree<'a>(
    x: &'a Matrix,
    sample: &'a [usize],
    weights: Vec<f64>,
    target: Target<'a>,
    params: &'a TreeParams,
    order: Option<&ColumnOrder>,
    rng: Option<&'a mut Rng>,
    n_classes: usize,
) -> DecisionTree {
    let owned;
    let order = match order {
        Some(o) => o,
        None => {
            owned = ColumnOrder::new(x);
            &owned
        }
    };
    let mut g = Grower {
        x,
        rows: sample,
        weights,
        target,
        params,
        orders: order.for_sample(x.rows(), sample),
        go_left: vec![false; sample.len()],
        scratch: Vec::with_capacity(sample.len()),
        nodes: Vec::new(),
        rng,
    };
    g.grow(0, sample.len(), 0);
    DecisionTree {
        nodes: g.nodes,
        n_features: x.cols(),
        n_classes,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    }
}

fn check_weights(weights: &[f64]) -> Result<(), ModelError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().all(|w| *w == 0.0) {
        return Err(ModelError::BadWeights);
    }
    Ok(())
}

/// Fits a classification tree on all rows. `weights` defaults to 1 per row.
pub fn fit_tree(
    x: &Matrix,
    y: &[usize],
    weights: Option<&[f64]>,
    n_classes: usize,
    params: &TreeParams,
) -> Result<DecisionTree, ModelError> {
    let sample: Vec<usize> = (0..x.rows()).collect();
    fit_tree_on_sample(x, y, weights, n_classes, params, &sample, None, None)
}

/// Fits a classification tree on the rows listed in `sample` (repeats
/// allowed, as in a bootstrap draw). `weights` is indexed by row.
#[allow(clippy::too_many_arguments)]
pub fn fit_tree_on_sample(
    x: &Matrix,
    y: &[usize],
    weights: Option<&[f64]>,
    n_classes: usize,
    params: &TreeParams,
    sample: &[usize],
    order: Option<&ColumnOrder>,
    rng: Option<&mut Rng>,
) -> Result<DecisionTree, ModelError> {
    check_labels(x, y, n_classes)?;
    if sample.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != x.rows() {
                return Err(ModelError::LengthMismatch {
                    rows: x.rows(),
                    labels: w.len(),
                });
            }
            check_weights(w)?;
            sample.iter().map(|&r| w[r]).collect()
        }
        None => vec![1.0; sample.len()],
    };
    let target = Target::Classes {
        y: sample.iter().map(|&r| y[r]).collect(),
        n_classes,
    };
    Ok(grow_tree(x, sample, w, target, params, order, rng, n_classes))
}

/// Fits a regression tree to `targets` with unit weights; each leaf's
/// value is `leaf(rows)` over the (ascending) rows that reach it.
pub fn fit_regression_tree(
    x: &Matrix,
    targets: &[f64],
    params: &TreeParams,
    order: Option<&ColumnOrder>,
    leaf: &dyn Fn(&[usize]) -> f64,
) -> Result<DecisionTree, ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if targets.len() != x.rows() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            labels: targets.len(),
        });
    }
    let sample: Vec<usize> = (0..x.rows()).collect();
    let target = Target::Regression {
        t: targets.to_vec(),
        leaf,
    };
    Ok(grow_tree(
        x,
        &sample,
        vec![1.0; x.rows()],
        target,
        params,
        order,
        None,
        0,
    ))
}

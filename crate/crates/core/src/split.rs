//! Stratified train/test/validation partitioning and k-fold planning.
//!
//! Per-class row counts are rounded so that every partition receives
//! `floor(n_c * f)` or one more row of class `c`, and the partition totals
//! equal the largest-remainder rounding of `N * f`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("class {class} has {rows} rows, fewer than k = {k}")]
    TooFewRows { class: usize, rows: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub val: Vec<usize>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

const EPS: f64 = 1e-9;

fn floor_parts(n: usize, fractions: &[f64; 3]) -> ([usize; 3], [f64; 3]) {
    let mut counts = [0usize; 3];
    let mut rems = [0f64; 3];
    for p in 0..3 {
        let exact = n as f64 * fractions[p];
        let fl = (exact + EPS).floor();
        counts[p] = fl as usize;
        rems[p] = if fractions[p] > 0.0 { (exact - fl).max(0.0) } else { 0.0 };
    }
    (counts, rems)
}

fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let (mut counts, rems) = floor_parts(n, fractions);
    let left = n.saturating_sub(counts.iter().sum());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].total_cmp(&rems[a]).then(a.cmp(&b)));
    for &p in order.iter().take(left) {
        counts[p] += 1;
    }
    counts
}

fn groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut g = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        g[l].push(i);
    }
    g
}

/// Greedy allocation can strand a partition below its target when the
/// classes able to top it up spent their leftover rows elsewhere. Moves
/// leftover rows along alternating paths (class `c` gives up its extra row
/// in partition `p` and takes one in `q`) until every target is met.
fn rebalance(
    classes: &[Vec<usize>],
    fractions: &[f64; 3],
    per_class: &mut [([usize; 3], [f64; 3])],
    deficit: &mut [i64; 3],
) {
    let floors: Vec<[usize; 3]> = classes
        .iter()
        .map(|rows| floor_parts(rows.len(), fractions).0)
        .collect();
    let can_move = |pc: &[([usize; 3], [f64; 3])], c: usize, p: usize, q: usize| {
        let (counts, rems) = &pc[c];
        counts[p] > floors[c][p] && counts[q] == floors[c][q] && rems[q] > 0.0
    };
    loop {
        let Some(src) = (0..3).find(|&p| deficit[p] < 0) else {
            return;
        };
        // breadth-first search over partitions from the over-full one
        let mut via: [Option<(usize, usize)>; 3] = [None; 3];
        let mut seen = [false; 3];
        seen[src] = true;
        let mut queue = vec![src];
        let mut sink = None;
        while let Some(p) = (!queue.is_empty()).then(|| queue.remove(0)) {
            if deficit[p] > 0 {
                sink = Some(p);
                break;
            }
            for q in 0..3 {
                if seen[q] {
                    continue;
                }
                if let Some(c) = (0..classes.len()).find(|&c| can_move(per_class, c, p, q)) {
                    seen[q] = true;
                    via[q] = Some((p, c));
                    queue.push(q);
                }
            }
        }
        let Some(mut q) = sink else {
            return;
        };
        while let Some((p, c)) = via[q] {
            per_class[c].0[p] -= 1;
            per_class[c].0[q] += 1;
            q = p;
        }
        deficit[src] += 1;
        deficit[sink.unwrap()] -= 1;
    }
}

/// Splits row indices by class with the given `(train, test, val)`
/// fractions. Within each class rows are shuffled with `seed`; partitions
/// list classes in ascending class order.
pub fn stratified_split(
    labels: &[usize],
    fractions: [f64; 3],
    seed: u64,
) -> Result<SplitIndices, SplitError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadFractions(fractions));
    }
    let classes = groups(labels);
    let targets = largest_remainder(labels.len(), &fractions);

    let mut per_class: Vec<([usize; 3], [f64; 3])> = classes
        .iter()
        .map(|rows| floor_parts(rows.len(), &fractions))
        .collect();
    let mut deficit: [i64; 3] = [0; 3];
    for p in 0..3 {
        let placed: usize = per_class.iter().map(|(c, _)| c[p]).sum();
        deficit[p] = targets[p] as i64 - placed as i64;
    }
    for (rows, (counts, rems)) in classes.iter().zip(per_class.iter_mut()) {
        let leftover = rows.len() - counts.iter().sum::<usize>();
        let mut candidates: Vec<usize> = (0..3).filter(|&p| rems[p] > 0.0).collect();
        candidates.sort_by(|&a, &b| {
            deficit[b]
                .cmp(&deficit[a])
                .then(rems[b].total_cmp(&rems[a]))
                .then(a.cmp(&b))
        });
        for &p in candidates.iter().take(leftover) {
            counts[p] += 1;
            deficit[p] -= 1;
        }
    }
    rebalance(&classes, &fractions, &mut per_class, &mut deficit);

    let mut rng = rng::seeded(seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        test: Vec::new(),
        val: Vec::new(),
        fractions,
        seed,
    };
    for (rows, (counts, _)) in classes.iter().zip(&per_class) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let (train, rest) = shuffled.split_at(counts[0]);
        let (test, val) = rest.split_at(counts[1]);
        out.train.extend_from_slice(train);
        out.test.extend_from_slice(test);
        out.val.extend_from_slice(val);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

pub const DEFAULT_FOLDS: usize = 5;

/// Stratified k-fold assignment: rows are shuffled within each class and
/// dealt round-robin across folds, continuing the deal from one class to
/// the next so fold sizes differ by at most one.
pub fn k_fold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan, SplitError> {
    if k < 2 {
        return Err(SplitError::BadK(k));
    }
    let classes = groups(labels);
    if let Some((class, rows)) = classes
        .iter()
        .enumerate()
        .find(|(_, r)| !r.is_empty() && r.len() < k)
    {
        return Err(SplitError::TooFewRows {
            class,
            rows: rows.len(),
            k,
        });
    }
    let mut rng = rng::seeded(seed);
    let mut folds = vec![Vec::new(); k];
    let mut position = 0usize;
    for rows in &classes {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        for i in shuffled {
            folds[position % k].push(i);
            position += 1;
        }
    }
    Ok(FoldPlan { k, folds, seed })
}

impl FoldPlan {
    /// `(train, validation)` index pairs in fold order; train concatenates
    /// the other folds in fold order.
    pub fn pairs(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        (0..self.k).map(move |v| {
            let train = self
                .folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != v)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            (train, self.folds[v].clone())
        })
    }
}

/// Arithmetic mean of per-fold scores.
pub fn mean_score(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(per_class: &[usize]) -> Vec<usize> {
        per_class
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect()
    }

    fn class_count(idx: &[usize], y: &[usize], c: usize) -> usize {
        idx.iter().filter(|&&i| y[i] == c).count()
    }

    #[test]
    fn seventy_twenty_ten() {
        let y = labels(&[50, 50]);
        let s = stratified_split(&y, [0.7, 0.2, 0.1], 1).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.val.len()), (70, 20, 10));
        for c in 0..2 {
            assert_eq!(class_count(&s.train, &y, c), 35);
            assert_eq!(class_count(&s.test, &y, c), 10);
            assert_eq!(class_count(&s.val, &y, c), 5);
        }
    }

    #[test]
    fn everything_in_train() {
        let y = labels(&[3, 4]);
        let s = stratified_split(&y, [1.0, 0.0, 0.0], 9).unwrap();
        assert_eq!(s.train.len(), 7);
        assert!(s.test.is_empty() && s.val.is_empty());
    }

    #[test]
    fn eleven_rows_per_class_rounding() {
        // 11 * 0.8 = 8.8 and 11 * 0.2 = 2.2 per class; 77 * 0.8 = 61.6 so
        // the totals round to 62 / 15 and exactly one class gives its
        // leftover row to test.
        let y = labels(&[11; 7]);
        let s = stratified_split(&y, [0.8, 0.2, 0.0], 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (62, 15));
        let mut shape = Vec::new();
        for c in 0..7 {
            let (tr, te) = (class_count(&s.train, &y, c), class_count(&s.test, &y, c));
            assert!((8..=9).contains(&tr) && (2..=3).contains(&te));
            shape.push((tr, te));
        }
        assert_eq!(shape.iter().filter(|s| **s == (8, 3)).count(), 1);
    }

    #[test]
    fn totals_hold_when_greedy_strands_a_partition() {
        let y = labels(&[11, 11, 11, 10, 10, 10]);
        let s = stratified_split(&y, [0.6, 0.25, 0.15], 26).unwrap();
        assert_eq!([s.train.len(), s.test.len(), s.val.len()], [38, 16, 9]);
        for c in 0..6 {
            let n = if c < 3 { 11.0 } else { 10.0 };
            for (part, f) in [(&s.train, 0.6), (&s.test, 0.25), (&s.val, 0.15)] {
                let got = part.iter().filter(|&&i| y[i] == c).count() as f64;
                assert!((got - n * f).abs() < 1.0, "class {c}");
            }
        }
    }

    #[test]
    fn bad_fractions() {
        let y = labels(&[5, 5]);
        assert!(stratified_split(&y, [0.5, 0.5, 0.5], 0).is_err());
        assert!(stratified_split(&y, [1.2, -0.2, 0.0], 0).is_err());
    }

    #[test]
    fn ten_rows_five_folds() {
        let y = labels(&[5, 5]);
        let plan = k_fold(&y, 5, 4).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(plan, k_fold(&y, 5, 4).unwrap());
    }

    #[test]
    fn hundred_rows_pairs_are_80_20() {
        let y = labels(&[50, 50]);
        let plan = k_fold(&y, 5, 0).unwrap();
        for (train, val) in plan.pairs() {
            assert_eq!((train.len(), val.len()), (80, 20));
        }
    }

    #[test]
    fn fold_errors() {
        assert_eq!(k_fold(&labels(&[3, 10]), 5, 0), Err(SplitError::TooFewRows { class: 0, rows: 3, k: 5 }));
        assert_eq!(k_fold(&labels(&[3]), 1, 0), Err(SplitError::BadK(1)));
    }

    #[test]
    fn mean_matches_sum_over_count() {
        let scores = [0.9, 0.8, 0.95, 1.0, 0.85];
        let mut acc = 0.0;
        for s in scores {
            acc += s;
        }
        assert!((mean_score(&scores) - acc / 5.0).abs() <= 1e-12);
    }
}

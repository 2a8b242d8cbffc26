//! Voting hybrids, confusion matrices, metrics and report files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::Task;
use crate::model::{check_width, Classifier, ModelError};
use crate::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no rows to evaluate")]
    EmptyMatrix,
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} outside {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Hard-voting ensemble. A row gets the label with the strictly largest
/// vote count; otherwise, among the tied labels, the one voted by the
/// earliest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEnsemble<M> {
    pub task: Task,
    pub names: Vec<String>,
    pub members: Vec<M>,
}

pub const BINARY_MEMBERS: [&str; 4] = ["rf", "gbm", "svm", "knn"];
pub const MULTICLASS_MEMBERS: [&str; 3] = ["rf", "gbm", "ada"];

impl<M: Classifier> VotingEnsemble<M> {
    pub fn new(task: Task, members: Vec<(String, M)>) -> Result<Self, ModelError> {
        if members.len() < 2 {
            return Err(ModelError::SchemaMismatch("a hybrid needs at least two members".into()));
        }
        let (d, c) = (members[0].1.n_features(), members[0].1.n_classes());
        for (name, m) in &members {
            if m.n_features() != d || m.n_classes() != c {
                return Err(ModelError::SchemaMismatch(format!(
                    "member {name} has {} features and {} classes, expected {d} and {c}",
                    m.n_features(),
                    m.n_classes()
                )));
            }
        }
        if c != task.n_classes() {
            return Err(ModelError::SchemaMismatch(format!(
                "{c} classes for the {} task",
                task.as_str()
            )));
        }
        let (names, members) = members.into_iter().unzip();
        Ok(Self {
            task,
            names,
            members,
        })
    }

    /// Per-member predictions, member-major.
    pub fn member_votes(&self, x: &Matrix) -> Result<Vec<Vec<usize>>, ModelError> {
        check_width(self.n_features(), x)?;
        self.members.par_iter().map(|m| m.predict(x)).collect()
    }
}

pub fn build_binary_hybrid<M: Classifier>(rf: M, gbm: M, svm: M, knn: M) -> Result<VotingEnsemble<M>, ModelError> {
    let members = BINARY_MEMBERS
        .iter()
        .map(|s| s.to_string())
        .zip([rf, gbm, svm, knn])
        .collect();
    VotingEnsemble::new(Task::Binary, members)
}

pub fn build_multiclass_hybrid<M: Classifier>(rf: M, gbm: M, ada: M) -> Result<VotingEnsemble<M>, ModelError> {
    let members = MULTICLASS_MEMBERS
        .iter()
        .map(|s| s.to_string())
        .zip([rf, gbm, ada])
        .collect();
    VotingEnsemble::new(Task::Multiclass, members)
}

/// Majority label of `votes` (in member order), ties to the label voted
/// first.
pub fn vote(votes: &[usize], n_classes: usize) -> usize {
    let mut count = vec![0usize; n_classes];
    for &v in votes {
        count[v] += 1;
    }
    let top = count.iter().copied().max().unwrap_or(0);
    votes
        .iter()
        .copied()
        .find(|&v| count[v] == top)
        .unwrap_or(0)
}

impl<M: Classifier> Classifier for VotingEnsemble<M> {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn n_classes(&self) -> usize {
        self.members[0].n_classes()
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        let votes = self.member_votes(x)?;
        let c = self.n_classes();
        let mut row = vec![0; votes.len()];
        Ok((0..x.rows())
            .map(|i| {
                for (slot, v) in row.iter_mut().zip(&votes) {
                    *slot = v[i];
                }
                vote(&row, c)
            })
            .collect())
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_csv(&self, class_names: &[&str]) -> String {
        let mut s = String::from("true\\predicted");
        for n in class_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (name, row) in class_names.iter().zip(&self.counts) {
            s.push_str(name);
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= n_classes) {
            return Err(EvalError::BadLabel {
                label,
                classes: n_classes,
            });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when a precision, recall or F1 denominator was zero and the
    /// value was reported as 0.
    pub flagged_zero_denominator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

/// One-vs-rest precision, recall and F1 per class, macro averages and
/// accuracy. `class_names` must have one entry per class.
pub fn compute_metrics(cm: &ConfusionMatrix, task: &str, class_names: &[&str]) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let c = cm.n_classes();
    let mut per_class = Vec::with_capacity(c);
    let mut trace = 0;
    for k in 0..c {
        let tp = cm.counts[k][k];
        trace += tp;
        let support: u64 = cm.counts[k].iter().sum();
        let predicted: u64 = cm.counts.iter().map(|r| r[k]).sum();
        let (precision, fp) = ratio(tp as f64, predicted as f64);
        let (recall, fr) = ratio(tp as f64, support as f64);
        let (f1, ff) = ratio(2.0 * precision * recall, precision + recall);
        per_class.push(ClassMetrics {
            class: class_names.get(k).map_or_else(|| k.to_string(), |s| s.to_string()),
            precision,
            recall,
            f1,
            support,
            flagged_zero_denominator: fp || fr || ff,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    Ok(MetricsReport {
        task: task.to_string(),
        accuracy: trace as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
    })
}

pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, EvalError> {
    fs::write(&path, contents).map_err(|source| EvalError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `metrics.json`, `confusion.csv` and one file per `(name, csv)`
/// curve into `dir`, returning the paths written.
pub fn export_report(
    metrics: &MetricsReport,
    cm: &ConfusionMatrix,
    class_names: &[&str],
    curves: &[(String, String)],
    dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(metrics).expect("metrics serialize") + "\n";
    let mut out = vec![
        write(dir.join(METRICS_FILE), &json)?,
        write(dir.join(CONFUSION_FILE), &cm.to_csv(class_names))?,
    ];
    for (name, csv) in curves {
        out.push(write(dir.join(name), csv)?);
    }
    Ok(out)
}

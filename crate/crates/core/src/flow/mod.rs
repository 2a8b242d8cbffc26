//! Labeled connection-log ingestion: parsing, imputation, label
//! canonicalization and class-balanced sampling.

mod label;
mod parse;
mod record;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use label::{
    canonicalize_label, known_detailed_labels, BinaryClass, ClassLabel, MultiClass, Task, LABEL_MAP,
};
pub use parse::{format_record, parse_conn_log, parse_conn_log_str, write_conn_log, CONN_FIELDS};
pub use record::{impute_missing, Proto, RawFlowRecord, UNKNOWN_SERVICE};

use crate::rng;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("line {line}: data row before any #fields directive")]
    MalformedHeader { line: usize },
    #[error("line {line}: #fields lacks required column {column:?}")]
    MissingColumn { line: usize, column: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric token {token:?} in column {column}")]
    BadNumeric {
        line: usize,
        column: String,
        token: String,
    },
    #[error("line {line}: label column is unset")]
    MissingLabel { line: usize },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<FlowError>,
    },
    #[error("unknown binary label {label:?}")]
    UnknownBinaryLabel { label: String },
    #[error("record {index} carries no label")]
    Unlabeled { index: usize },
    #[error("class {class} has no rows")]
    EmptyClass { class: String },
    #[error("per-class sample size must be at least 1")]
    BadSampleSize,
}

/// A record after imputation, paired with its canonical label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFlow {
    pub record: RawFlowRecord,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    pub sampling_seed: Option<u64>,
    pub per_class: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<LabeledFlow>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Imputes and labels parsed records. Every record must carry a label.
    pub fn from_records(records: Vec<RawFlowRecord>) -> Result<Dataset, FlowError> {
        let rows = records
            .into_iter()
            .enumerate()
            .map(|(index, record)| {
                let raw = record
                    .raw_label
                    .as_deref()
                    .ok_or(FlowError::Unlabeled { index })?;
                let label =
                    canonicalize_label(raw, record.raw_detailed_label.as_deref().unwrap_or("-"))?;
                Ok(LabeledFlow {
                    record: impute_missing(record),
                    label,
                })
            })
            .collect::<Result<Vec<_>, FlowError>>()?;
        Ok(Dataset {
            rows,
            provenance: Provenance::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Class index of every row under `task`; `None` for rows outside it.
    pub fn class_indices(&self, task: Task) -> Vec<Option<usize>> {
        self.rows.iter().map(|r| task.class_of(&r.label)).collect()
    }

    /// Keeps only rows that belong to `task`.
    pub fn restrict_to(&self, task: Task) -> Dataset {
        Dataset {
            rows: self
                .rows
                .iter()
                .filter(|r| task.class_of(&r.label).is_some())
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Lists the log files under `path` (the path itself when it is a file),
/// sorted by name. Hidden files are skipped.
pub fn log_files(path: &Path) -> Result<Vec<PathBuf>, FlowError> {
    let io = |source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io)? {
        let entry = entry.map_err(io)?;
        let p = entry.path();
        let hidden = p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if p.is_file() && !hidden {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses one log file.
pub fn read_log_file(path: &Path) -> Result<Vec<RawFlowRecord>, FlowError> {
    let file = fs::File::open(path).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_conn_log(BufReader::new(file)).map_err(|e| FlowError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

/// Parses every log under `path` (files in parallel, rows kept in file
/// order) and builds a labeled dataset.
pub fn load_dataset(path: &Path) -> Result<Dataset, FlowError> {
    let files = log_files(path)?;
    let parsed = files
        .par_iter()
        .map(|f| read_log_file(f))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ds = Dataset::from_records(parsed.into_iter().flatten().collect())?;
    ds.provenance.sources = files.iter().map(|f| file_label(f)).collect();
    Ok(ds)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Draws up to `per_class` rows of every class of `task`, without
/// replacement. Rows outside the task are dropped. Output is grouped by
/// class in canonical order, each group in sampled order.
pub fn balance_sample(
    dataset: &Dataset,
    task: Task,
    per_class: usize,
    seed: u64,
) -> Result<Dataset, FlowError> {
    if per_class == 0 {
        return Err(FlowError::BadSampleSize);
    }
    let classes = dataset.class_indices(task);
    let mut rng = rng::seeded(seed);
    let mut rows = Vec::new();
    for (c, name) in task.class_names().iter().enumerate() {
        let members: Vec<usize> = classes
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == Some(c))
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(FlowError::EmptyClass {
                class: name.to_string(),
            });
        }
        let take = per_class.min(members.len());
        for pick in index::sample(&mut rng, members.len(), take) {
            rows.push(dataset.rows[members[pick]].clone());
        }
    }
    let mut provenance = dataset.provenance.clone();
    provenance.sampling_seed = Some(seed);
    provenance.per_class = Some(per_class);
    Ok(Dataset { rows, provenance })
}

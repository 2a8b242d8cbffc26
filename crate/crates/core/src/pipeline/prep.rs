//! Splitting and train-only fitting of the feature transform.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::features::{
    assemble, extract_all, fit_min_max, fit_one_hot, CidrTable, FeatureError, FeatureSchema,
    MinMaxParams, OneHotVocabulary,
};
use crate::flow::{Dataset, RawFlowRecord, Task};
use crate::split::{stratified_split, SplitIndices};
use crate::Matrix;

/// Everything needed to turn flow records into model input, fitted once on
/// training rows and stored with every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub schema: FeatureSchema,
    pub vocabulary: OneHotVocabulary,
    pub scaler: MinMaxParams,
    pub cidr: CidrTable,
}

impl Preprocessing {
    /// Fits on `train` and returns the transformed training matrix too.
    pub fn fit_transform(
        train: &Dataset,
        cidr: &CidrTable,
        expected_width: Option<usize>,
    ) -> Result<(Self, Matrix), FeatureError> {
        let feats = extract_all(train.rows.iter().map(|r| &r.record), cidr)?;
        let vocabulary = fit_one_hot(&feats);
        let schema = FeatureSchema::from_vocabulary(&vocabulary);
        if let Some(expected) = expected_width {
            if expected != schema.width() {
                return Err(FeatureError::SchemaMismatch {
                    expected,
                    found: schema.width(),
                });
            }
        }
        let (raw, _) = assemble(&feats, &vocabulary);
        let scaler = fit_min_max(&raw);
        let x = scaler.transform(&raw)?;
        Ok((
            Self {
                schema,
                vocabulary,
                scaler,
                cidr: cidr.clone(),
            },
            x,
        ))
    }

    pub fn transform_records<'a, I>(&self, records: I) -> Result<Matrix, FeatureError>
    where
        I: IntoIterator<Item = &'a RawFlowRecord>,
    {
        let feats = extract_all(records, &self.cidr)?;
        let (raw, _) = assemble(&feats, &self.vocabulary);
        self.scaler.transform(&raw)
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Matrix, FeatureError> {
        self.transform_records(ds.rows.iter().map(|r| &r.record))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessEvent {
    Read(Partition),
    FitPreprocessing,
}

/// Hands out partitions of a split dataset and records every access.
struct PartitionAccess<'a> {
    ds: &'a Dataset,
    split: &'a SplitIndices,
    log: Vec<AccessEvent>,
}

impl PartitionAccess<'_> {
    fn read(&mut self, p: Partition) -> Dataset {
        self.log.push(AccessEvent::Read(p));
        let idx = match p {
            Partition::Train => &self.split.train,
            Partition::Test => &self.split.test,
            Partition::Val => &self.split.val,
        };
        self.ds.subset(idx)
    }
}

/// A transformed partition with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub x: Matrix,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub preprocessing: Preprocessing,
    pub split: SplitIndices,
    /// Untransformed training rows, for per-fold refitting.
    pub train_rows: Dataset,
    pub train: Part,
    pub test: Part,
    pub val: Part,
    pub access_log: Vec<AccessEvent>,
}

fn labels(ds: &Dataset, task: Task) -> Vec<usize> {
    ds.class_indices(task)
        .into_iter()
        .map(|c| c.expect("dataset restricted to task"))
        .collect()
}

/// Splits `ds` (already restricted to `task`), fits the transform on the
/// training partition only, then transforms the other partitions.
pub fn prepare(
    ds: &Dataset,
    task: Task,
    fractions: [f64; 3],
    seed: u64,
    cidr: &CidrTable,
    expected_width: Option<usize>,
) -> Result<Prepared, PipelineError> {
    let y = labels(ds, task);
    let split = stratified_split(&y, fractions, seed)?;
    let mut access = PartitionAccess {
        ds,
        split: &split,
        log: Vec::new(),
    };
    let train_rows = access.read(Partition::Train);
    if train_rows.is_empty() {
        return Err(PipelineError::Data("training partition is empty".into()));
    }
    let (preprocessing, x_train) = Preprocessing::fit_transform(&train_rows, cidr, expected_width)?;
    access.log.push(AccessEvent::FitPreprocessing);
    let mut part = |p: Partition| -> Result<Part, PipelineError> {
        let rows = access.read(p);
        Ok(Part {
            x: preprocessing.transform(&rows)?,
            y: labels(&rows, task),
        })
    };
    let test = part(Partition::Test)?;
    let val = part(Partition::Val)?;
    let train = Part {
        x: x_train,
        y: labels(&train_rows, task),
    };
    let access_log = access.log;
    Ok(Prepared {
        preprocessing,
        split,
        train_rows,
        train,
        test,
        val,
        access_log,
    })
}

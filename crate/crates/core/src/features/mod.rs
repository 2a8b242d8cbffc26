//! Flow records to scaled numeric feature matrices.
//!
//! Column order is fixed by the schema: the numeric flow fields, then the
//! two engineered address-scope indicators, then one one-hot block per
//! categorical field (protocol, service, connection state and the two
//! endpoint countries).

mod importance;
mod ip;
mod onehot;
mod scale;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use importance::{
    permutation_importance, shuffle_order, FeatureImportance, ImportanceReport, DEFAULT_REPEATS,
};
pub use ip::{derive_ip_features, scope, CidrTable, IpFeatures, IpScope, Prefix, UNKNOWN_COUNTRY};
pub use onehot::{CategoricalFeature, OneHotVocabulary, UnseenCategory};
pub use scale::{fit_min_max, transform_min_max, ColumnRange, MinMaxParams, TRAIN_PARTITION};

use crate::flow::{impute_missing, ClassLabel, Dataset, RawFlowRecord, UNKNOWN_SERVICE};
use crate::Matrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("malformed IP address {0:?}")]
    BadIpSyntax(String),
    #[error("malformed CIDR entry {0:?}")]
    BadCidr(String),
    #[error("CIDR table must start with the header \"cidr,country\"")]
    BadCidrHeader,
    #[error("column count mismatch: expected {expected}, found {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("feature width {found} differs from the expected {expected}")]
    SchemaMismatch { expected: usize, found: usize },
}

pub const NUMERIC_COLUMNS: [&str; 12] = [
    "duration",
    "orig_p",
    "resp_p",
    "orig_bytes",
    "resp_bytes",
    "local_orig",
    "local_resp",
    "missed_bytes",
    "orig_pkts",
    "orig_ip_bytes",
    "resp_pkts",
    "resp_ip_bytes",
];

pub const ENGINEERED_COLUMNS: [&str; 2] = ["orig_ip_private", "resp_ip_private"];

pub const CATEGORICAL_COLUMNS: [&str; 5] =
    ["proto", "service", "conn_state", "orig_country", "resp_country"];

/// Source columns removed before modeling, with the reason.
pub const DROPPED_COLUMNS: [(&str, &str); 6] = [
    ("id.orig_h", "raw address replaced by scope and country"),
    ("id.resp_h", "raw address replaced by scope and country"),
    ("uid", "connection identifier"),
    ("ts", "timestamp identifier"),
    ("tunnel_parents", "free-text identifier"),
    ("history", "no accuracy loss when permuted"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    OneHot { feature: String, category: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<FeatureColumn>,
    pub dropped: Vec<DroppedColumn>,
}

impl FeatureSchema {
    /// Schema implied by a fitted vocabulary.
    pub fn from_vocabulary(vocab: &OneHotVocabulary) -> Self {
        let mut columns: Vec<FeatureColumn> = NUMERIC_COLUMNS
            .iter()
            .chain(ENGINEERED_COLUMNS.iter())
            .map(|n| FeatureColumn {
                name: n.to_string(),
                kind: ColumnKind::Numeric,
            })
            .collect();
        for f in &vocab.features {
            for c in &f.categories {
                columns.push(FeatureColumn {
                    name: format!("{}={}", f.name, c),
                    kind: ColumnKind::OneHot {
                        feature: f.name.clone(),
                        category: c.clone(),
                    },
                });
            }
        }
        let dropped = DROPPED_COLUMNS
            .iter()
            .map(|(n, r)| DroppedColumn {
                name: n.to_string(),
                reason: r.to_string(),
            })
            .collect();
        Self { columns, dropped }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

/// Numeric and categorical values of one flow before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFeatures {
    pub numeric: [f64; 14],
    pub categorical: [String; 5],
}

fn num<T: Into<f64> + Copy>(v: Option<T>) -> f64 {
    v.map_or(0.0, Into::into)
}

fn count(v: Option<u64>) -> f64 {
    v.map_or(0.0, |c| c as f64)
}

/// Extracts features from one record (imputing any unset field first).
pub fn extract(record: &RawFlowRecord, cidr: &CidrTable) -> Result<FlowFeatures, FeatureError> {
    let r = if record.is_complete() {
        std::borrow::Cow::Borrowed(record)
    } else {
        std::borrow::Cow::Owned(impute_missing(record.clone()))
    };
    let ip = derive_ip_features(&r.orig_h, &r.resp_h, cidr)?;
    let private = |s: IpScope| if s == IpScope::Private { 1.0 } else { 0.0 };
    let flag = |b: Option<bool>| if b == Some(true) { 1.0 } else { 0.0 };
    Ok(FlowFeatures {
        numeric: [
            num(r.duration),
            f64::from(r.orig_p),
            f64::from(r.resp_p),
            count(r.orig_bytes),
            count(r.resp_bytes),
            flag(r.local_orig),
            flag(r.local_resp),
            count(r.missed_bytes),
            count(r.orig_pkts),
            count(r.orig_ip_bytes),
            count(r.resp_pkts),
            count(r.resp_ip_bytes),
            private(ip.orig_scope),
            private(ip.resp_scope),
        ],
        categorical: [
            r.proto.to_string(),
            r.service.clone().unwrap_or_else(|| UNKNOWN_SERVICE.to_string()),
            r.conn_state.clone(),
            ip.orig_country,
            ip.resp_country,
        ],
    })
}

pub fn extract_all<'a, I>(records: I, cidr: &CidrTable) -> Result<Vec<FlowFeatures>, FeatureError>
where
    I: IntoIterator<Item = &'a RawFlowRecord>,
{
    records.into_iter().map(|r| extract(r, cidr)).collect()
}

/// Vocabulary over the categorical fields of the fitting rows.
pub fn fit_one_hot(train: &[FlowFeatures]) -> OneHotVocabulary {
    let rows: Vec<Vec<&str>> = train
        .iter()
        .map(|f| f.categorical.iter().map(String::as_str).collect())
        .collect();
    OneHotVocabulary::fit(&CATEGORICAL_COLUMNS, &rows)
}

/// Unscaled matrix: numeric columns followed by one-hot blocks, plus a
/// count of every unseen category encountered.
pub fn assemble(
    rows: &[FlowFeatures],
    vocab: &OneHotVocabulary,
) -> (Matrix, BTreeMap<UnseenCategory, usize>) {
    let width = NUMERIC_COLUMNS.len() + ENGINEERED_COLUMNS.len() + vocab.width();
    let mut data = Vec::with_capacity(rows.len() * width);
    let mut unseen = BTreeMap::new();
    for r in rows {
        data.extend_from_slice(&r.numeric);
        for u in vocab.encode_into(&r.categorical, &mut data) {
            *unseen.entry(u).or_insert(0) += 1;
        }
    }
    for (u, n) in &unseen {
        log::warn!("{} row(s) with unseen {} value {:?}", n, u.feature, u.value);
    }
    (Matrix::from_vec(rows.len(), width, data), unseen)
}

/// Scaled features with schema and aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub schema: FeatureSchema,
    pub labels: Vec<ClassLabel>,
    pub unseen: BTreeMap<UnseenCategory, usize>,
}

/// Builds the scaled matrix of `dataset` with transform state fitted on the
/// training partition. `expected_width`, when given, is checked against
/// the finalized schema.
pub fn build_feature_matrix(
    dataset: &Dataset,
    cidr: &CidrTable,
    vocab: &OneHotVocabulary,
    params: &MinMaxParams,
    expected_width: Option<usize>,
) -> Result<FeatureMatrix, FeatureError> {
    let schema = FeatureSchema::from_vocabulary(vocab);
    if let Some(expected) = expected_width {
        if expected != schema.width() {
            return Err(FeatureError::SchemaMismatch {
                expected,
                found: schema.width(),
            });
        }
    }
    let rows = extract_all(dataset.rows.iter().map(|r| &r.record), cidr)?;
    let (raw, unseen) = assemble(&rows, vocab);
    let values = params.transform(&raw)?;
    Ok(FeatureMatrix {
        values,
        schema,
        labels: dataset.rows.iter().map(|r| r.label).collect(),
        unseen,
    })
}

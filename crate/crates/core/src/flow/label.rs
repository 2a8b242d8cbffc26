use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::FlowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryClass {
    Benign,
    Malicious,
}

/// The seven traffic classes of the multi-class task, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MultiClass {
    Benign,
    CcHeartBeat,
    DDoS,
    Okiru,
    PortScan,
    Cc,
    Attack,
}

impl MultiClass {
    pub const ALL: [MultiClass; 7] = [
        MultiClass::Benign,
        MultiClass::CcHeartBeat,
        MultiClass::DDoS,
        MultiClass::Okiru,
        MultiClass::PortScan,
        MultiClass::Cc,
        MultiClass::Attack,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Spelling used by the public capture files.
    pub fn dataset_spelling(self) -> &'static str {
        match self {
            MultiClass::Benign => "-",
            MultiClass::CcHeartBeat => "C&C-HeartBeat",
            MultiClass::DDoS => "DDoS",
            MultiClass::Okiru => "Okiru",
            MultiClass::PortScan => "PartOfAHorizontalPortScan",
            MultiClass::Cc => "C&C",
            MultiClass::Attack => "Attack",
        }
    }
}

impl fmt::Display for MultiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(Task::Multiclass.class_names()[self.index()])
    }
}

/// Canonical label of a flow. `multi == None` is the sentinel for detailed
/// labels outside the seven-class vocabulary; such rows still take part in
/// the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub binary: BinaryClass,
    pub multi: Option<MultiClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
}

const BINARY_NAMES: [&str; 2] = ["Benign", "Malicious"];
const MULTI_NAMES: [&str; 7] = [
    "Benign",
    "C&C-HeartBeat",
    "DDoS",
    "Okiru",
    "PortScan",
    "C&C",
    "Attack",
];

impl Task {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Task::Binary => &BINARY_NAMES,
            Task::Multiclass => &MULTI_NAMES,
        }
    }

    pub fn n_classes(self) -> usize {
        self.class_names().len()
    }

    /// Class index of a label under this task, or `None` when the row does
    /// not belong to the task.
    pub fn class_of(self, label: &ClassLabel) -> Option<usize> {
        match self {
            Task::Binary => Some(label.binary as usize),
            Task::Multiclass => label.multi.map(MultiClass::index),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mapped {
    Class(MultiClass),
    Excluded,
}

/// The shipped detailed-label mapping table.
pub const LABEL_MAP: &str = include_str!("../../data/label_map.csv");

fn label_table() -> &'static HashMap<String, Mapped> {
    static TABLE: OnceLock<HashMap<String, Mapped>> = OnceLock::new();
    TABLE.get_or_init(|| {
        LABEL_MAP
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let (key, class) = l.split_once(',').expect("label map row");
                let mapped = match class.trim() {
                    "benign" => Mapped::Class(MultiClass::Benign),
                    "cc_heartbeat" => Mapped::Class(MultiClass::CcHeartBeat),
                    "ddos" => Mapped::Class(MultiClass::DDoS),
                    "okiru" => Mapped::Class(MultiClass::Okiru),
                    "port_scan" => Mapped::Class(MultiClass::PortScan),
                    "cc" => Mapped::Class(MultiClass::Cc),
                    "attack" => Mapped::Class(MultiClass::Attack),
                    "excluded" => Mapped::Excluded,
                    other => panic!("unknown class {other:?} in label map"),
                };
                (key.trim().to_string(), mapped)
            })
            .collect()
    })
}

/// Detailed labels listed in the mapping table (normalized spelling).
pub fn known_detailed_labels() -> Vec<&'static str> {
    let mut keys: Vec<&str> = label_table().keys().map(String::as_str).collect();
    keys.sort_unstable();
    keys
}

/// Maps raw label columns onto the canonical class pair.
pub fn canonicalize_label(raw_label: &str, raw_detailed: &str) -> Result<ClassLabel, FlowError> {
    let binary = match raw_label.trim().to_ascii_lowercase().as_str() {
        "benign" => BinaryClass::Benign,
        "malicious" => BinaryClass::Malicious,
        _ => {
            return Err(FlowError::UnknownBinaryLabel {
                label: raw_label.to_string(),
            })
        }
    };
    if binary == BinaryClass::Benign {
        return Ok(ClassLabel {
            binary,
            multi: Some(MultiClass::Benign),
        });
    }
    let key = raw_detailed.trim().to_ascii_lowercase();
    let multi = match label_table().get(&key) {
        Some(Mapped::Class(MultiClass::Benign)) | Some(Mapped::Excluded) | None => None,
        Some(Mapped::Class(c)) => Some(*c),
    };
    Ok(ClassLabel { binary, multi })
}

//! Commands that apply a trained model bundle to new data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use super::models::Model;
use super::prep::Preprocessing;
use super::PipelineError;
use crate::eval::{compute_metrics, confusion, MetricsReport};
use crate::features::{permutation_importance, ImportanceReport};
use crate::flow::{impute_missing, load_dataset, log_files, read_log_file, Task};
use crate::model::Classifier;
use crate::Matrix;

pub const BUNDLE_FILE: &str = "model.json";
pub const BUNDLE_VERSION: u32 = 1;

/// A trained model together with the preprocessing state fitted on its
/// training rows; applying it never refits anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: ModelKind,
    pub task: Task,
    pub class_names: Vec<String>,
    pub preprocessing: Preprocessing,
    pub model: Model,
}

impl ModelBundle {
    fn check(&self, x: &Matrix) -> Result<(), PipelineError> {
        if x.cols() != self.model.n_features() {
            return Err(PipelineError::ModelDataMismatch(format!(
                "model expects {} features, data transforms to {}",
                self.model.n_features(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Labeled rows of the bundle's task, transformed.
    fn labeled(&self, data: &Path) -> Result<(Matrix, Vec<usize>), PipelineError> {
        let ds = load_dataset(data)?.restrict_to(self.task);
        if ds.is_empty() {
            return Err(PipelineError::EmptyMatrix);
        }
        let x = self.preprocessing.transform(&ds)?;
        self.check(&x)?;
        let y = ds
            .class_indices(self.task)
            .into_iter()
            .map(|c| c.expect("restricted to task"))
            .collect();
        Ok((x, y))
    }
}

/// Reads `model.json` from a run's model directory (or the file itself).
pub fn load_bundle(path: &Path) -> Result<ModelBundle, PipelineError> {
    let file = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(PipelineError::io(&file))?;
    let bundle: ModelBundle = serde_json::from_str(&text)
        .map_err(|e| PipelineError::ModelDataMismatch(format!("{}: {e}", file.display())))?;
    if bundle.format_version != BUNDLE_VERSION {
        return Err(PipelineError::ModelDataMismatch(format!(
            "bundle format {} is not supported",
            bundle.format_version
        )));
    }
    Ok(bundle)
}

fn confusion_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.confusion.csv"))
}

/// Scores a bundle on labeled logs. Writes the metrics JSON to `report`
/// and the confusion matrix next to it.
pub fn cmd_evaluate(model: &Path, data: &Path, report: &Path) -> Result<MetricsReport, PipelineError> {
    let bundle = load_bundle(model)?;
    let (x, y) = bundle.labeled(data)?;
    let pred = bundle
        .model
        .predict(&x)
        .map_err(PipelineError::model(bundle.kind.as_str()))?;
    let names: Vec<&str> = bundle.class_names.iter().map(String::as_str).collect();
    let cm = confusion(&y, &pred, names.len())?;
    let metrics = compute_metrics(&cm, bundle.task.as_str(), &names)?;
    if let Some(dir) = report.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
    }
    let json = serde_json::to_string_pretty(&metrics).expect("serializable") + "\n";
    fs::write(report, json).map_err(PipelineError::io(report))?;
    let cpath = confusion_path(report);
    fs::write(&cpath, cm.to_csv(&names)).map_err(PipelineError::io(&cpath))?;
    Ok(metrics)
}

/// Predicts every row of `input` (labels, if present, are ignored) and
/// writes `row_index,predicted_label[,p_<class>...]`. Returns the
/// predicted class indices.
pub fn cmd_predict(model: &Path, input: &Path, output: &Path) -> Result<Vec<usize>, PipelineError> {
    let bundle = load_bundle(model)?;
    let mut records = Vec::new();
    for f in log_files(input)? {
        records.extend(read_log_file(&f)?.into_iter().map(impute_missing));
    }
    if records.is_empty() {
        return Err(PipelineError::EmptyMatrix);
    }
    let x = bundle.preprocessing.transform_records(&records)?;
    bundle.check(&x)?;
    let name = bundle.kind.as_str();
    let pred = bundle.model.predict(&x).map_err(PipelineError::model(name))?;
    let proba = bundle.model.predict_proba(&x).map_err(PipelineError::model(name))?;
    let mut csv = String::from("row_index,predicted_label");
    if proba.is_some() {
        for c in &bundle.class_names {
            let _ = write!(csv, ",p_{c}");
        }
    }
    csv.push('\n');
    for (i, &p) in pred.iter().enumerate() {
        let _ = write!(csv, "{i},{}", bundle.class_names[p]);
        if let Some(pm) = &proba {
            for v in pm.row(i) {
                let _ = write!(csv, ",{v}");
            }
        }
        csv.push('\n');
    }
    fs::write(output, csv).map_err(PipelineError::io(output))?;
    Ok(pred)
}

/// Permutation importance of every feature of the bundle on labeled logs.
pub fn cmd_importance(
    model: &Path,
    data: &Path,
    repeats: usize,
    seed: u64,
    out: &Path,
) -> Result<ImportanceReport, PipelineError> {
    let bundle = load_bundle(model)?;
    let (x, y) = bundle.labeled(data)?;
    let names = bundle.preprocessing.schema.names();
    let report = permutation_importance(&bundle.model, &x, &y, &names, repeats, seed)
        .map_err(PipelineError::model(bundle.kind.as_str()))?;
    fs::write(out, report.to_csv()).map_err(PipelineError::io(out))?;
    Ok(report)
}

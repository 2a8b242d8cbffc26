//! The `train` command: one experiment run from config to manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::apply::{ModelBundle, BUNDLE_FILE, BUNDLE_VERSION};
use super::config::{ExperimentConfig, ModelKind};
use super::models::{train_model, Model, TrainData};
use super::prep::{prepare, AccessEvent, Preprocessing};
use super::PipelineError;
use crate::eval::{
    build_binary_hybrid, build_multiclass_hybrid, compute_metrics, confusion, export_report,
    MetricsReport,
};
use crate::features::CidrTable;
use crate::flow::{balance_sample, load_dataset, log_files, Dataset, Task};
use crate::model::{accuracy, Classifier};
use crate::rng::derive_seed;
use crate::split::{k_fold, mean_score};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock times vary between runs, so they live outside the digested
/// set to keep manifests reproducible.
pub const TIMINGS_FILE: &str = "timings.json";
const ACCESS_LOG_FILE: &str = "access_log.json";
const SUMMARY_FILE: &str = "summary.json";
const CV_FILE: &str = "cv_scores.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub rows: usize,
    pub train: usize,
    pub test: usize,
    pub val: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub data_files: Vec<DataFile>,
    pub sampling_seed: Option<u64>,
    pub per_class: Option<usize>,
    pub split: SplitSizes,
    pub feature_width: usize,
    pub models: Vec<ModelKind>,
    pub timings_file: String,
    /// Relative path to sha256 of every other file written by the run.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    pub folds: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub manifest: RunManifest,
    pub metrics: BTreeMap<ModelKind, MetricsReport>,
    pub cv: BTreeMap<ModelKind, CvScores>,
    pub access_log: Vec<AccessEvent>,
    pub seconds: BTreeMap<ModelKind, f64>,
}

pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(PipelineError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Seed for one model kind, independent of which other models are trained.
fn model_seed(seed: u64, kind: ModelKind) -> u64 {
    derive_seed(seed, &[100 + kind as u64])
}

fn load_cidr(path: Option<&Path>) -> Result<CidrTable, PipelineError> {
    match path {
        None => Ok(CidrTable::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(PipelineError::io(p))?;
            Ok(CidrTable::from_csv(&text)?)
        }
    }
}

/// Kind, model, named curves and training seconds.
type TrainedEntry = (ModelKind, Model, Vec<(String, String)>, f64);

/// Trains every standalone model in `plan`, then composes the hybrid from
/// its members when it is planned.
fn train_plan(
    cfg: &ExperimentConfig,
    plan: &[ModelKind],
    data: &TrainData,
) -> Result<Vec<TrainedEntry>, PipelineError> {
    let mut trained = plan
        .par_iter()
        .filter(|k| **k != ModelKind::Hybrid)
        .map(|&kind| {
            let start = Instant::now();
            debug!("training {}", kind.as_str());
            let t = train_model(kind, &cfg.hyperparams, data, model_seed(cfg.seed, kind))
                .map_err(PipelineError::model(kind.as_str()))?;
            Ok((kind, t.model, t.curves, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    if plan.contains(&ModelKind::Hybrid) {
        let start = Instant::now();
        let member = |k: ModelKind| {
            trained
                .iter()
                .find(|t| t.0 == k)
                .map(|t| t.1.clone())
                .expect("hybrid members are in the plan")
        };
        let hybrid = match cfg.task {
            Task::Binary => build_binary_hybrid(
                member(ModelKind::Rf),
                member(ModelKind::Gbm),
                member(ModelKind::Svm),
                member(ModelKind::Knn),
            ),
            Task::Multiclass => build_multiclass_hybrid(
                member(ModelKind::Rf),
                member(ModelKind::Gbm),
                member(ModelKind::Ada),
            ),
        }
        .map_err(PipelineError::model("hybrid"))?;
        trained.push((ModelKind::Hybrid, Model::Hybrid(hybrid), Vec::new(), start.elapsed().as_secs_f64()));
    }
    Ok(trained)
}

fn cross_validate(
    cfg: &ExperimentConfig,
    plan: &[ModelKind],
    train_rows: &Dataset,
    cidr: &CidrTable,
) -> Result<BTreeMap<ModelKind, CvScores>, PipelineError> {
    let y: Vec<usize> = train_rows
        .class_indices(cfg.task)
        .into_iter()
        .map(|c| c.expect("restricted to task"))
        .collect();
    let folds = k_fold(&y, cfg.cv_folds, derive_seed(cfg.seed, &[3]))?;
    let mut scores: BTreeMap<ModelKind, Vec<f64>> = BTreeMap::new();
    for (f, (fit_idx, hold_idx)) in folds.pairs().enumerate() {
        info!("cross-validation fold {}/{}", f + 1, cfg.cv_folds);
        // Each fold refits the transform on its own training rows.
        let (pre, x) = Preprocessing::fit_transform(&train_rows.subset(&fit_idx), cidr, cfg.expected_width)?;
        let xh = pre.transform(&train_rows.subset(&hold_idx))?;
        let yf: Vec<usize> = fit_idx.iter().map(|&i| y[i]).collect();
        let yh: Vec<usize> = hold_idx.iter().map(|&i| y[i]).collect();
        let data = TrainData {
            x: &x,
            y: &yf,
            val: None,
            n_classes: cfg.task.n_classes(),
        };
        for (kind, model, _, _) in train_plan(cfg, plan, &data)? {
            let pred = model.predict(&xh).map_err(PipelineError::model(kind.as_str()))?;
            scores.entry(kind).or_default().push(accuracy(&yh, &pred));
        }
    }
    Ok(scores
        .into_iter()
        .map(|(k, folds)| {
            let mean = mean_score(&folds);
            (k, CvScores { folds, mean })
        })
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(PipelineError::io(path))?;
    Ok(path.to_path_buf())
}

/// Runs one experiment on the logs under `data`, writing every artifact
/// into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<TrainReport, PipelineError> {
    cfg.validate()?;
    let task = cfg.task;
    let cidr = load_cidr(cfg.paths.cidr.as_deref())?;
    let files = log_files(data)?;
    if files.is_empty() {
        return Err(PipelineError::Data(format!("no log files under {}", data.display())));
    }
    let loaded = load_dataset(data)?;
    let ds = match cfg.per_class {
        Some(n) => balance_sample(&loaded, task, n, derive_seed(cfg.seed, &[1]))?,
        None => loaded.restrict_to(task),
    };
    info!("{} rows for the {} task", ds.len(), task.as_str());
    let prepared = prepare(&ds, task, cfg.split, derive_seed(cfg.seed, &[2]), &cidr, cfg.expected_width)?;
    let plan = cfg.training_plan();

    fs::create_dir_all(out).map_err(PipelineError::io(out))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let cv = if cfg.cv_folds >= 2 {
        let cv = cross_validate(cfg, &plan, &prepared.train_rows, &cidr)?;
        let named: BTreeMap<&str, &CvScores> = cv.iter().map(|(k, v)| (k.as_str(), v)).collect();
        written.push(write_json(&out.join(CV_FILE), &named)?);
        cv
    } else {
        BTreeMap::new()
    };

    let val = (prepared.val.x.rows() > 0).then_some((&prepared.val.x, prepared.val.y.as_slice()));
    let data_in = TrainData {
        x: &prepared.train.x,
        y: &prepared.train.y,
        val,
        n_classes: task.n_classes(),
    };
    let trained = train_plan(cfg, &plan, &data_in)?;

    let names = task.class_names();
    let mut metrics = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    for (kind, model, curves, secs) in trained {
        let dir = out.join(kind.as_str());
        let pred = model
            .predict(&prepared.test.x)
            .map_err(PipelineError::model(kind.as_str()))?;
        let cm = confusion(&prepared.test.y, &pred, task.n_classes())?;
        let report = compute_metrics(&cm, task.as_str(), names)?;
        info!("{}: test accuracy {:.4}", kind.as_str(), report.accuracy);
        written.extend(export_report(&report, &cm, names, &curves, &dir)?);
        let bundle = ModelBundle {
            format_version: BUNDLE_VERSION,
            kind,
            task,
            class_names: names.iter().map(|s| s.to_string()).collect(),
            preprocessing: prepared.preprocessing.clone(),
            model,
        };
        written.push(write_json(&dir.join(BUNDLE_FILE), &bundle)?);
        metrics.insert(kind, report);
        seconds.insert(kind, secs);
    }

    written.push(write_json(&out.join(ACCESS_LOG_FILE), &prepared.access_log)?);
    let summary: BTreeMap<&str, (f64, f64)> = metrics
        .iter()
        .map(|(k, m)| (k.as_str(), (m.accuracy, m.macro_f1)))
        .collect();
    written.push(write_json(&out.join(SUMMARY_FILE), &summary)?);
    let timings: BTreeMap<&str, f64> = seconds.iter().map(|(k, s)| (k.as_str(), *s)).collect();
    write_json(&out.join(TIMINGS_FILE), &timings)?;

    let mut digests = BTreeMap::new();
    for path in &written {
        let rel = path
            .strip_prefix(out)
            .expect("written under out")
            .to_string_lossy()
            .replace('\\', "/");
        digests.insert(rel, file_digest(path)?);
    }
    let data_files = files
        .iter()
        .map(|f| {
            Ok(DataFile {
                name: f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: file_digest(f)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let manifest = RunManifest {
        config: cfg.clone(),
        data_files,
        sampling_seed: ds.provenance.sampling_seed,
        per_class: ds.provenance.per_class,
        split: SplitSizes {
            rows: ds.len(),
            train: prepared.split.train.len(),
            test: prepared.split.test.len(),
            val: prepared.split.val.len(),
        },
        feature_width: prepared.preprocessing.schema.width(),
        models: plan,
        timings_file: TIMINGS_FILE.to_string(),
        files: digests,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(TrainReport {
        manifest,
        metrics,
        cv,
        access_log: prepared.access_log,
        seconds,
    })
}

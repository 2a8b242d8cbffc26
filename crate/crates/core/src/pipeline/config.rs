//! Experiment configuration (JSON).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::flow::Task;
use crate::knn::DEFAULT_K;
use crate::neural::{AnnOptions, CnnOptions, TrainParams};
use crate::svm::SvmParams;
use crate::trees::{AdaParams, ForestParams, GbmParams};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Gbm,
    Ada,
    Knn,
    Svm,
    Ann,
    Cnn,
    Hybrid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Rf,
        ModelKind::Gbm,
        ModelKind::Ada,
        ModelKind::Knn,
        ModelKind::Svm,
        ModelKind::Ann,
        ModelKind::Cnn,
        ModelKind::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
            ModelKind::Ada => "ada",
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
            ModelKind::Ann => "ann",
            ModelKind::Cnn => "cnn",
            ModelKind::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Members of the voting hybrid for `task`, in voting priority order.
    pub fn hybrid_members(task: Task) -> &'static [ModelKind] {
        match task {
            Task::Binary => &[ModelKind::Rf, ModelKind::Gbm, ModelKind::Svm, ModelKind::Knn],
            Task::Multiclass => &[ModelKind::Rf, ModelKind::Gbm, ModelKind::Ada],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub rf: ForestParams,
    pub gbm: GbmParams,
    pub ada: AdaParams,
    pub knn: KnnParams,
    pub svm: SvmParams,
    pub ann: AnnOptions,
    pub cnn: CnnOptions,
    /// Optimizer settings shared by the ANN and CNN.
    pub network: TrainParams,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    /// CSV with header `cidr,country`; without it every address maps to
    /// the unknown country.
    pub cidr: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub task: Task,
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    /// Train, test and validation fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    /// Folds of cross-validation over the training partition; 0 disables.
    #[serde(default)]
    pub cv_folds: usize,
    /// Rows drawn per class before splitting; all rows when absent.
    #[serde(default)]
    pub per_class: Option<usize>,
    pub seed: u64,
    /// Checked against the fitted feature width when present.
    #[serde(default)]
    pub expected_width: Option<usize>,
    #[serde(default)]
    pub paths: Paths,
}

fn default_split() -> [f64; 3] {
    [0.7, 0.2, 0.1]
}

impl ExperimentConfig {
    pub fn new(task: Task, models: Vec<ModelKind>, seed: u64) -> Self {
        Self {
            config_version: CONFIG_VERSION,
            task,
            models,
            hyperparams: Hyperparams::default(),
            split: default_split(),
            cv_folds: 0,
            per_class: None,
            seed,
            expected_width: None,
            paths: Paths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.config_version != CONFIG_VERSION {
            return bad(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                self.config_version
            ));
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return bad("a model is listed twice".into());
        }
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !f.is_finite() || *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {:?} must be >= 0 and sum to 1", self.split));
        }
        if self.split[0] <= 0.0 || self.split[1] <= 0.0 {
            return bad("train and test fractions must be positive".into());
        }
        if self.cv_folds == 1 {
            return bad("cv_folds must be 0 or at least 2".into());
        }
        if self.per_class == Some(0) {
            return bad("per_class must be positive".into());
        }
        Ok(())
    }

    /// Models to train: the configured ones plus any hybrid members, in
    /// canonical order, with the hybrid last.
    pub fn training_plan(&self) -> Vec<ModelKind> {
        let mut plan: Vec<ModelKind> = self.models.clone();
        if plan.contains(&ModelKind::Hybrid) {
            plan.extend_from_slice(ModelKind::hybrid_members(self.task));
        }
        plan.sort();
        plan.dedup();
        plan
    }
}

//! End-to-end experiment commands: synthetic data, training runs with
//! manifests, evaluation, prediction and importance analysis.

mod apply;
mod config;
mod models;
mod prep;
mod run;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::flow::FlowError;
use crate::model::ModelError;
use crate::split::SplitError;

pub use apply::{
    cmd_evaluate, cmd_importance, cmd_predict, load_bundle, ModelBundle, BUNDLE_FILE,
    BUNDLE_VERSION,
};
pub use config::{ExperimentConfig, Hyperparams, KnnParams, ModelKind, Paths, CONFIG_VERSION};
pub use models::{train_model, Model, TrainData, Trained};
pub use prep::{prepare, AccessEvent, Part, Partition, Prepared, Preprocessing};
pub use run::{cmd_train, file_digest, RunManifest, TrainReport, MANIFEST_FILE, TIMINGS_FILE};
pub use synth::{cmd_synth, synth_records, SynthSpec, SYNTH_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model {name}: {source}")]
    Model {
        name: String,
        #[source]
        source: ModelError,
    },
    #[error("model does not match data: {0}")]
    ModelDataMismatch(String),
    #[error("no rows to evaluate")]
    EmptyMatrix,
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status for the command line: 2 for configuration
    /// problems, 3 for data and file problems, 4 for model problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::EmptyMatrix | PipelineError::Io { .. } => 3,
            PipelineError::Model { .. } | PipelineError::ModelDataMismatch(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }

    pub(crate) fn model(name: &str) -> impl FnOnce(ModelError) -> PipelineError + '_ {
        move |source| PipelineError::Model {
            name: name.to_string(),
            source,
        }
    }
}

impl From<FlowError> for PipelineError {
    fn from(e: FlowError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<FeatureError> for PipelineError {
    fn from(e: FeatureError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<SplitError> for PipelineError {
    fn from(e: SplitError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptyMatrix => PipelineError::EmptyMatrix,
            EvalError::Io { path, source } => PipelineError::Io { path, source },
            e => PipelineError::Data(e.to_string()),
        }
    }
}

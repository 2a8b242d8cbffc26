//! The closed set of trainable models and how each is fitted.

use serde::{Deserialize, Serialize};

use super::config::{Hyperparams, ModelKind};
use crate::eval::VotingEnsemble;
use crate::knn::{fit_knn, KnnModel};
use crate::model::{Classifier, ModelError};
use crate::neural::{build_ann, build_cnn, train_network, Network};
use crate::rng::derive_seed;
use crate::split::stratified_split;
use crate::svm::{fit_svm_classifier, OvrSvm};
use crate::trees::{fit_adaboost, fit_forest, fit_gbm, AdaModel, ForestModel, GbmModel};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Model {
    Rf(ForestModel),
    Gbm(GbmModel),
    Ada(AdaModel),
    Knn(KnnModel),
    Svm(OvrSvm),
    Ann(Network),
    Cnn(Network),
    Hybrid(VotingEnsemble<Model>),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rf(_) => ModelKind::Rf,
            Model::Gbm(_) => ModelKind::Gbm,
            Model::Ada(_) => ModelKind::Ada,
            Model::Knn(_) => ModelKind::Knn,
            Model::Svm(_) => ModelKind::Svm,
            Model::Ann(_) => ModelKind::Ann,
            Model::Cnn(_) => ModelKind::Cnn,
            Model::Hybrid(_) => ModelKind::Hybrid,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Rf(m) => m,
            Model::Gbm(m) => m,
            Model::Ada(m) => m,
            Model::Knn(m) => m,
            Model::Svm(m) => m,
            Model::Ann(m) | Model::Cnn(m) => m,
            Model::Hybrid(m) => m,
        }
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        self.inner().predict(x)
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Option<Matrix>, ModelError> {
        self.inner().predict_proba(x)
    }
}

pub struct TrainData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    /// Early-stopping data; when absent a stratified fifth of the training
    /// rows is held out instead.
    pub val: Option<(&'a Matrix, &'a [usize])>,
    pub n_classes: usize,
}

pub struct Trained {
    pub model: Model,
    /// `(file name, csv)` training curves.
    pub curves: Vec<(String, String)>,
}

struct Holdout {
    x: Matrix,
    y: Vec<usize>,
    xv: Matrix,
    yv: Vec<usize>,
}

fn holdout(data: &TrainData, seed: u64) -> Result<Holdout, ModelError> {
    if let Some((xv, yv)) = data.val.filter(|(xv, _)| xv.rows() > 0) {
        return Ok(Holdout {
            x: data.x.clone(),
            y: data.y.to_vec(),
            xv: xv.clone(),
            yv: yv.to_vec(),
        });
    }
    let split = stratified_split(data.y, [0.8, 0.0, 0.2], seed)
        .map_err(|e| ModelError::BadParam(e.to_string()))?;
    if split.val.is_empty() || split.train.is_empty() {
        return Err(ModelError::EmptyValidation);
    }
    Ok(Holdout {
        x: data.x.select_rows(&split.train),
        y: split.train.iter().map(|&i| data.y[i]).collect(),
        xv: data.x.select_rows(&split.val),
        yv: split.val.iter().map(|&i| data.y[i]).collect(),
    })
}

/// Fits one standalone model. Hybrids are composed from trained members
/// by the caller.
pub fn train_model(kind: ModelKind, hp: &Hyperparams, data: &TrainData, seed: u64) -> Result<Trained, ModelError> {
    let c = data.n_classes;
    let no_curves = |model| Trained {
        model,
        curves: Vec::new(),
    };
    Ok(match kind {
        ModelKind::Rf => no_curves(Model::Rf(fit_forest(data.x, data.y, c, &hp.rf, seed)?)),
        ModelKind::Ada => no_curves(Model::Ada(fit_adaboost(data.x, data.y, c, &hp.ada)?)),
        ModelKind::Knn => no_curves(Model::Knn(fit_knn(data.x, data.y, c, hp.knn.k)?)),
        ModelKind::Svm => no_curves(Model::Svm(fit_svm_classifier(data.x, data.y, c, &hp.svm, seed)?)),
        ModelKind::Gbm => {
            let h = holdout(data, derive_seed(seed, &[0]))?;
            let (m, curve) = fit_gbm(&h.x, &h.y, &h.xv, &h.yv, c, &hp.gbm)?;
            Trained {
                model: Model::Gbm(m),
                curves: vec![("loss_curve.csv".into(), curve.to_csv())],
            }
        }
        ModelKind::Ann | ModelKind::Cnn => {
            let h = holdout(data, derive_seed(seed, &[0]))?;
            let spec = if kind == ModelKind::Ann {
                build_ann(data.x.cols(), c, &hp.ann)?
            } else {
                build_cnn(data.x.cols(), c, &hp.cnn)?
            };
            let (net, curve) =
                train_network(&spec, &h.x, &h.y, &h.xv, &h.yv, &hp.network, derive_seed(seed, &[1]))?;
            let model = if kind == ModelKind::Ann {
                Model::Ann(net)
            } else {
                Model::Cnn(net)
            };
            Trained {
                model,
                curves: vec![("loss_curve.csv".into(), curve.to_csv())],
            }
        }
        ModelKind::Hybrid => {
            return Err(ModelError::BadParam(
                "the hybrid is composed from trained members".into(),
            ))
        }
    })
}

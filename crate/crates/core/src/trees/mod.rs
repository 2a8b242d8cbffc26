//! Tree learners: single CART trees, random forests, SAMME boosting and
//! gradient boosting.

pub mod adaboost;
pub mod forest;
pub mod gbm;
pub mod tree;

pub use adaboost::{fit_adaboost, AdaModel, AdaParams};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use gbm::{fit_gbm, GbmModel, GbmParams, TrainCurve};
pub use tree::{fit_tree, DecisionTree, TreeParams};

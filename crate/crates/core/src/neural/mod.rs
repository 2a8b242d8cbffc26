//! Small dense and 1D-convolutional network engine trained with Adam.

pub mod layers;
pub mod network;
pub mod ops;
pub mod tensor;
pub mod train;

pub use layers::{LayerSpec, Mode};
pub use network::{build_ann, build_cnn, AnnOptions, CnnOptions, Network, NetworkSpec};
pub use tensor::Tensor;
pub use train::{grad_check, train_network, TrainParams, TrainingCurve};

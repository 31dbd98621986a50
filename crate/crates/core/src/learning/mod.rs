//! Φ preprocessing, a CNN track regressor and an encoder-decoder LSTM
//! forecaster on a small hand-written reverse-mode kernel.

pub mod cnn;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod phi;
pub mod seq2seq;
pub mod tensor;
pub mod train;

pub use cnn::{cnn_forward, CnnArch, CnnModel};
pub use gradcheck::grad_check;
pub use model::Model;
pub use phi::{build_phi, PhiMatrix};
pub use seq2seq::{lstm_forecast, Seq2SeqModel};
pub use tensor::Tensor;
pub use train::{train, DatasetSplit, EpochStats, OptimizerKind, Sample, TrainConfig, TrainReport};

//! Closed-loop simulation, dataset generation and evaluation sweeps.

pub mod config;
pub mod dataset;
pub mod episode;
pub mod evaluate;
pub mod sim;
pub mod training;

pub use config::{Config, EpisodeConfig, EstimatorKind, GreedyInit, PredictorKind, RangeMode};
pub use dataset::{cnn_samples, generate_dataset, lstm_samples, Dataset, Sample};
pub use episode::{run_episode, EpisodeLog, EpisodeSummary, RevolutionRecord, RevolutionSummary};
pub use evaluate::{evaluate, scenario_matrix, write_eval_csv, EvalRow, Scenario};
pub use sim::{estimate_track, predict, EstimatorSettings, Models, RangeSynth};
pub use training::{cnn_errors, lstm_errors, train_cnn, train_lstm, Trained};

use super::config::Config;
use super::dataset::{cnn_samples, lstm_samples, Dataset};
use crate::error::Result;
use crate::learning::{cnn_forward, lstm_forecast, train, CnnModel, DatasetSplit, Seq2SeqModel, TrainReport};
use crate::metrics::TrackError;
use crate::par::{self, Exec};

/// A trained network with its learning curve and the split it was fit on.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub report: TrainReport,
    pub split: DatasetSplit,
}

/// Fits a CNN on the training part of `ds`, selecting on the validation part.
pub fn train_cnn(cfg: &Config, ds: &Dataset, exec: Exec) -> Result<Trained<CnnModel>> {
    let l = &cfg.learning;
    let model = CnnModel::initialized(l.arch(), ds.n_spots(), ds.n_meas(), l.scale, l.train.seed)?;
    let samples = cnn_samples(ds, &model, exec)?;
    let split = DatasetSplit::new(samples.len(), l.train.seed);
    let tr = DatasetSplit::select(&samples, &split.train);
    let va = DatasetSplit::select(&samples, &split.validation);
    let (model, report) = train(model, &tr, &va, &l.train, exec)?;
    Ok(Trained { model, report, split })
}

/// Fits the forecaster on true `(U, F)` pairs.
pub fn train_lstm(cfg: &Config, ds: &Dataset, exec: Exec) -> Result<Trained<Seq2SeqModel>> {
    let l = &cfg.learning;
    let model = Seq2SeqModel::initialized(l.lstm_hidden, ds.horizon(), l.lstm_scale, l.train.seed)?;
    let samples = lstm_samples(ds, &model, exec)?;
    let split = DatasetSplit::new(samples.len(), l.train.seed);
    let tr = DatasetSplit::select(&samples, &split.train);
    let va = DatasetSplit::select(&samples, &split.validation);
    let (model, report) = train(model, &tr, &va, &l.train, exec)?;
    Ok(Trained { model, report, split })
}

/// Localization error of the CNN on the chosen samples.
pub fn cnn_errors(model: &CnnModel, ds: &Dataset, idx: &[usize], exec: Exec) -> Result<Vec<TrackError>> {
    par::try_map_slice(exec, idx, |&i| {
        let s = &ds.samples[i];
        TrackError::new(&s.track, &cnn_forward(model, &s.phi)?)
    })
}

/// Forecast error of the LSTM on the chosen samples.
pub fn lstm_errors(model: &Seq2SeqModel, ds: &Dataset, idx: &[usize], exec: Exec) -> Result<Vec<TrackError>> {
    par::try_map_slice(exec, idx, |&i| {
        let s = &ds.samples[i];
        TrackError::new(&s.future, &lstm_forecast(model, &s.track)?)
    })
}

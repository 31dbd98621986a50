use std::sync::Arc;

use rand::Rng;

use super::config::{Config, EstimatorKind, GreedyInit, PredictorKind, RangeMode};
use crate::channel::{draw_rubble_losses, snr_db, synth_range};
use crate::error::{Error, Result};
use crate::geometry::{UavPath, Vec2};
use crate::learning::{build_phi, cnn_forward, lstm_forecast, CnnModel, Model, PhiMatrix, Seq2SeqModel};
use crate::multilateration::{gauss_newton_refine_mode, linear_solve_mode, AnchorSet, SolveMode, SolverConfig};
use crate::pseudotri::{solve_dp_oracle, solve_greedy_passes, PseudoTriInstance, StepCost};
use crate::ranging::{gen_zc, measure_range, Correlator, ZcSequence};

/// Trained networks available to estimators and predictors.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub cnn: Option<Arc<CnnModel>>,
    pub lstm: Option<Arc<Seq2SeqModel>>,
}

impl Models {
    /// Loads the checkpoints named in the config, if any.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let load = |p: &std::path::Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("model file {} not found", p.display())))
            }
        };
        let mut m = Models::default();
        if let Some(p) = &cfg.learning.cnn_model {
            load(p)?;
            m.cnn = Some(Arc::new(CnnModel::load(p)?));
        }
        if let Some(p) = &cfg.learning.lstm_model {
            load(p)?;
            m.lstm = Some(Arc::new(Seq2SeqModel::load(p)?));
        }
        Ok(m)
    }

    pub fn check(&self, cfg: &Config) -> Result<()> {
        if cfg.episode.estimator == EstimatorKind::Cnn && self.cnn.is_none() {
            return Err(Error::Config("estimator cnn needs a CNN model (learning.cnn_model)".into()));
        }
        if cfg.episode.predictor == PredictorKind::Lstm && self.lstm.is_none() {
            return Err(Error::Config("predictor lstm needs an LSTM model (learning.lstm_model)".into()));
        }
        Ok(())
    }
}

/// Turns true geometry into the `N x L` measured range matrix.
pub struct RangeSynth {
    cfg: Config,
    signal: Option<(ZcSequence, Correlator)>,
}

impl RangeSynth {
    pub fn new(cfg: &Config) -> Result<Self> {
        let signal = match cfg.ranging.mode {
            RangeMode::Fast => None,
            RangeMode::Full => {
                let s = cfg.ranging.signal;
                s.validate()?;
                Some((gen_zc(s.root_q, s.n_zc)?, Correlator::new(s.n_zc, s.upsample_k)))
            }
        };
        Ok(Self { cfg: cfg.clone(), signal })
    }

    /// All `L` measurements at a spot are taken against the same target
    /// position.
    pub fn ranges<R: Rng + ?Sized>(&self, path: &UavPath, track: &[Vec2], n_meas: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let noise = &self.cfg.noise;
        let rubble = draw_rubble_losses(path.len(), noise, rng);
        path.spots
            .iter()
            .zip(track)
            .zip(&rubble)
            .map(|((spot, target), loss)| {
                let gamma = spot.dist(target.with_z(0.0));
                match &self.signal {
                    None => Ok((0..n_meas).map(|_| synth_range(gamma, noise, *loss, rng)).collect()),
                    Some((zc, corr)) => {
                        let horizontal = spot.xy().dist(*target);
                        (0..n_meas)
                            .map(|_| {
                                let snr = snr_db(spot.z, horizontal, *loss, &self.cfg.channel, rng)?;
                                Ok(measure_range(corr, zc, gamma, snr, &self.cfg.ranging.signal, rng)?.range_meters)
                            })
                            .collect()
                    }
                }
            })
            .collect()
    }

    pub fn phi<R: Rng + ?Sized>(&self, path: &UavPath, track: &[Vec2], n_meas: usize, rng: &mut R) -> Result<PhiMatrix> {
        build_phi(&self.ranges(path, track, n_meas, rng)?, path)
    }
}

/// Per-spot mean range, the input of the geometric estimators.
pub fn mean_ranges(phi: &PhiMatrix) -> Vec<f64> {
    phi.row_means()
}

pub fn pseudotri_instance(phi: &PhiMatrix) -> Result<PseudoTriInstance> {
    PseudoTriInstance::new(UavPath { spots: phi.spot_block.clone() }, mean_ranges(phi), 0.0)
}

/// Estimator knobs shared across a run.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSettings {
    pub kind: EstimatorKind,
    pub greedy_passes: usize,
    pub greedy_init: GreedyInit,
    pub dp_bins: usize,
}

impl EstimatorSettings {
    pub fn from_config(cfg: &Config) -> Self {
        let e = &cfg.episode;
        Self { kind: e.estimator, greedy_passes: e.greedy_passes, greedy_init: e.greedy_init, dp_bins: e.dp_bins }
    }
}

/// Estimated `N x 2` track for one revolution. `truth_first` is only read
/// when the greedy solver is initialized from the true position.
pub fn estimate_track(phi: &PhiMatrix, s: &EstimatorSettings, models: &Models, truth_first: Vec2) -> Result<Vec<Vec2>> {
    match s.kind {
        EstimatorKind::Greedy => {
            let inst = pseudotri_instance(phi)?;
            let init = match s.greedy_init {
                GreedyInit::FirstSpot => phi.spot_block[0].xy(),
                GreedyInit::Truth => truth_first,
            };
            Ok(solve_greedy_passes(&inst, init, s.greedy_passes, StepCost::Distance).positions)
        }
        EstimatorKind::DpOracle => Ok(solve_dp_oracle(&pseudotri_instance(phi)?, s.dp_bins)?.positions),
        EstimatorKind::Cnn => {
            let m = models.cnn.as_ref().ok_or_else(|| Error::Config("no CNN model loaded".into()))?;
            cnn_forward(m, phi)
        }
        EstimatorKind::MultilatBaseline => {
            let set = AnchorSet::new(phi.spot_block.clone(), mean_ranges(phi))?;
            let mode = SolveMode::Planar { z: 0.0 };
            let init = match linear_solve_mode(&set, mode) {
                Ok(p) => p,
                Err(_) => phi.reference().with_z(0.0),
            };
            let p = gauss_newton_refine_mode(&set, init, &SolverConfig { regularization: 1e-9, ..SolverConfig::default() }, mode)?.position;
            Ok(vec![p.xy(); phi.n_spots])
        }
    }
}

/// Forecast `F̂` of `horizon` points after `u_hat`.
pub fn predict(kind: PredictorKind, u_hat: &[Vec2], horizon: usize, models: &Models) -> Result<Vec<Vec2>> {
    match kind {
        PredictorKind::Persistence => {
            let last = *u_hat.last().ok_or_else(|| crate::error::param("empty track"))?;
            Ok(vec![last; horizon])
        }
        PredictorKind::Lstm => {
            let m = models.lstm.as_ref().ok_or_else(|| Error::Config("no LSTM model loaded".into()))?;
            lstm_forecast(m, u_hat)
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelParams, RangingNoiseModel};
use crate::control::RadiusBounds;
use crate::error::{param, Error, Result};
use crate::learning::{CnnArch, TrainConfig};
use crate::mobility::MobilityConfig;
use crate::ranging::RangingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub x_c: f64,
    pub y_c: f64,
    pub h: f64,
    pub rho: f64,
    pub a: f64,
    /// Interpret `(x_c, y_c)` as an offset from the target's start position.
    pub relative_to_target: bool,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { x_c: 0.0, y_c: 0.0, h: 100.0, rho: 250.0, a: 0.0, relative_to_target: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Gaussian or Rayleigh range errors from the noise model.
    #[default]
    Fast,
    /// Signal-level ToF estimation at the path-loss SNR.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RangingSection {
    pub mode: RangeMode,
    #[serde(flatten)]
    pub signal: RangingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub kp: f64,
    pub ki: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// UAV cruise speed, m/s.
    pub uav_speed: f64,
    /// When false the orbit stays at its initial parameters.
    pub enabled: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { kp: 0.1, ki: 0.11, rho_min: 50.0, rho_max: 250.0, uav_speed: 5.0, enabled: true }
    }
}

impl ControlConfig {
    pub fn bounds(&self) -> RadiusBounds {
        RadiusBounds { rho_min: self.rho_min, rho_max: self.rho_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Cnn,
    #[default]
    Greedy,
    DpOracle,
    MultilatBaseline,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "cnn" => Ok(Self::Cnn),
            "greedy" => Ok(Self::Greedy),
            "dp_oracle" => Ok(Self::DpOracle),
            "multilat_baseline" => Ok(Self::MultilatBaseline),
            other => Err(param(format!("unknown estimator {other:?}"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cnn => "cnn",
            Self::Greedy => "greedy",
            Self::DpOracle => "dp_oracle",
            Self::MultilatBaseline => "multilat_baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Lstm,
    #[default]
    Persistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GreedyInit {
    /// Horizontal position of the first spot.
    #[default]
    FirstSpot,
    /// The true first target position.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeSection {
    pub n_spots: usize,
    pub n_meas: usize,
    pub revolutions: usize,
    pub estimator: EstimatorKind,
    pub predictor: PredictorKind,
    pub seed: u64,
    pub greedy_passes: usize,
    pub greedy_init: GreedyInit,
    pub dp_bins: usize,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self {
            n_spots: 100,
            n_meas: 100,
            revolutions: 10,
            estimator: EstimatorKind::Greedy,
            predictor: PredictorKind::Persistence,
            seed: 0,
            greedy_passes: 1,
            greedy_init: GreedyInit::FirstSpot,
            dp_bins: 360,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Perturbation amplitude drawn from `[0, a_max_frac * rho]`.
    pub a_max_frac: f64,
    /// Orbit center drawn within `center_offset_frac * rho` of the target.
    pub center_offset_frac: f64,
    /// Forecast horizon; zero means one revolution (`n_spots`).
    pub horizon: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n_samples: 5000, rho_min: 50.0, rho_max: 250.0, a_max_frac: 0.1, center_offset_frac: 0.5, horizon: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Meters per unit of CNN input and output.
    pub scale: f64,
    pub lstm_scale: f64,
    pub lstm_hidden: usize,
    pub filters1: usize,
    pub filters2: usize,
    pub kernel: usize,
    pub padding: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub train: TrainConfig,
    pub cnn_model: Option<PathBuf>,
    pub lstm_model: Option<PathBuf>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        let a = CnnArch::default();
        Self {
            scale: 1000.0,
            lstm_scale: 100.0,
            lstm_hidden: 64,
            filters1: a.filters1,
            filters2: a.filters2,
            kernel: a.kernel,
            padding: a.padding,
            fc1: a.fc1,
            fc2: a.fc2,
            train: TrainConfig::default(),
            cnn_model: None,
            lstm_model: None,
        }
    }
}

impl LearningConfig {
    pub fn arch(&self) -> CnnArch {
        CnnArch {
            filters1: self.filters1,
            filters2: self.filters2,
            kernel: self.kernel,
            padding: self.padding,
            fc1: self.fc1,
            fc2: self.fc2,
        }
    }
}

/// Every tunable of a run, one section per module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub trajectory: TrajectoryConfig,
    pub mobility: MobilityConfig,
    pub channel: ChannelParams,
    pub noise: RangingNoiseModel,
    pub ranging: RangingSection,
    pub control: ControlConfig,
    pub episode: EpisodeSection,
    pub dataset: DatasetConfig,
    pub learning: LearningConfig,
}

/// Configuration of one closed-loop episode.
pub type EpisodeConfig = Config;

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.episode;
        if e.n_spots < 1 || e.n_meas < 1 || e.revolutions < 1 {
            return Err(param("n_spots, n_meas and revolutions must be >= 1"));
        }
        if e.greedy_passes < 1 {
            return Err(param("greedy_passes must be >= 1"));
        }
        self.mobility.validate()?;
        self.channel.validate()?;
        self.noise.validate()?;
        self.ranging.signal.validate()?;
        self.control.bounds().validate()?;
        if !(self.control.uav_speed > 0.0) {
            return Err(param("uav_speed must be > 0"));
        }
        if !(self.trajectory.h > 0.0) {
            return Err(param("altitude must be > 0"));
        }
        let d = &self.dataset;
        if !(d.rho_min > 0.0 && d.rho_min <= d.rho_max) || !(0.0..1.0).contains(&d.a_max_frac) {
            return Err(param("dataset radius range or perturbation fraction invalid"));
        }
        Ok(())
    }

    /// Forecast horizon `F`.
    pub fn horizon(&self) -> usize {
        if self.dataset.horizon == 0 {
            self.episode.n_spots
        } else {
            self.dataset.horizon
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

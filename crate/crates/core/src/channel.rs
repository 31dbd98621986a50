//! Air-to-ground propagation and synthetic range measurements.
//!
//! Path loss follows the usual elevation-dependent LoS/NLoS mixture with
//! log-normal shadowing. It is only used to report an SNR per measurement
//! spot; the range error itself is drawn from a distance-proportional
//! Gaussian, optionally biased by a per-spot rubble loss.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Mean excess loss under line of sight, dB.
    pub eta_los: f64,
    /// Mean excess loss without line of sight, dB.
    pub eta_nlos: f64,
    pub a_env: f64,
    pub b_env: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_sh: f64,
    /// UE transmit power used for SNR reporting, dBm.
    pub tx_power_dbm: f64,
    /// Receiver noise floor, dBm.
    pub noise_floor_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            eta_los: 2.3,
            eta_nlos: 34.0,
            a_env: 27.23,
            b_env: 0.08,
            f_c: 1.8e9,
            sigma_sh: 4.0,
            tx_power_dbm: 23.0,
            // thermal noise over 18 MHz plus a 7 dB noise figure
            noise_floor_dbm: -174.0 + 10.0 * 18.0e6f64.log10() + 7.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_c > 0.0) {
            return Err(param(format!("carrier frequency must be > 0, got {}", self.f_c)));
        }
        if !(self.sigma_sh >= 0.0) {
            return Err(param(format!("sigma_sh must be >= 0, got {}", self.sigma_sh)));
        }
        Ok(())
    }
}

/// Probability of line of sight at altitude `h` and ground distance `r`.
/// The elevation angle enters in degrees.
pub fn p_los(h: f64, r: f64, p: &ChannelParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(param(format!("altitude must be > 0, got {h}")));
    }
    if !(r >= 0.0) {
        return Err(param(format!("ground distance must be >= 0, got {r}")));
    }
    let theta = h.atan2(r).to_degrees();
    Ok(1.0 / (1.0 + p.a_env * (-p.b_env * (theta - p.a_env)).exp()))
}

/// Deterministic part of the path loss (no shadowing), dB.
pub fn mean_path_loss_db(h: f64, r: f64, p: &ChannelParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(param(format!("altitude must be > 0, got {h}")));
    }
    let d = h.hypot(r);
    if !(d > 0.0) {
        return Err(Error::Domain("zero 3D distance".into()));
    }
    let plos = p_los(h, r, p)?;
    let fspl = 20.0 * (4.0 * PI * p.f_c / SPEED_OF_LIGHT).log10();
    Ok(fspl + 20.0 * d.log10() + plos * p.eta_los + (1.0 - plos) * p.eta_nlos)
}

/// Path loss with a log-normal shadowing draw, dB.
pub fn path_loss_db<R: Rng + ?Sized>(h: f64, r: f64, p: &ChannelParams, rng: &mut R) -> Result<f64> {
    let mean = mean_path_loss_db(h, r, p)?;
    Ok(mean + shadowing_db(p.sigma_sh, rng))
}

fn shadowing_db<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
}

/// Received SNR in dB for a spot, including an extra rubble loss.
pub fn snr_db<R: Rng + ?Sized>(h: f64, r: f64, rubble_loss_db: f64, p: &ChannelParams, rng: &mut R) -> Result<f64> {
    Ok(p.tx_power_dbm - path_loss_db(h, r, p, rng)? - rubble_loss_db - p.noise_floor_dbm)
}

/// Distribution of the zero-mean ranging error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RangeNoise {
    /// Gaussian with `sigma = sigma0 + k_dist * gamma`.
    Gaussian,
    /// Positive Rayleigh excess with variance `alpha * gamma`.
    Rayleigh { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangingNoiseModel {
    pub sigma0: f64,
    pub k_dist: f64,
    pub rubble_enabled: bool,
    pub rubble_loss_max: f64,
    /// Range bias per dB of rubble loss, m/dB.
    pub beta_rubble: f64,
    pub noise: RangeNoise,
    pub seed: u64,
}

impl Default for RangingNoiseModel {
    fn default() -> Self {
        Self {
            sigma0: 2.0,
            k_dist: 0.05,
            rubble_enabled: false,
            rubble_loss_max: 60.0,
            beta_rubble: 0.5,
            noise: RangeNoise::Gaussian,
            seed: 0,
        }
    }
}

impl RangingNoiseModel {
    /// No noise, no rubble.
    pub fn noiseless() -> Self {
        Self { sigma0: 0.0, k_dist: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0) || !(self.k_dist >= 0.0) || !(self.rubble_loss_max >= 0.0) {
            return Err(param("sigma0, k_dist and rubble_loss_max must be >= 0"));
        }
        if let RangeNoise::Rayleigh { alpha } = self.noise {
            if !(alpha >= 0.0) {
                return Err(param(format!("rayleigh alpha must be >= 0, got {alpha}")));
            }
        }
        Ok(())
    }

    pub fn sigma_at(&self, gamma: f64) -> f64 {
        self.sigma0 + self.k_dist * gamma
    }

    pub fn is_noiseless(&self) -> bool {
        let quiet = match self.noise {
            RangeNoise::Gaussian => self.sigma0 == 0.0 && self.k_dist == 0.0,
            RangeNoise::Rayleigh { alpha } => alpha == 0.0,
        };
        quiet && !self.rubble_enabled
    }
}

/// One noisy range for true distance `true_gamma`, clamped at zero.
pub fn synth_range<R: Rng + ?Sized>(true_gamma: f64, model: &RangingNoiseModel, spot_rubble_loss: f64, rng: &mut R) -> f64 {
    debug_assert!(true_gamma >= 0.0);
    let bias = if model.rubble_enabled { model.beta_rubble * spot_rubble_loss } else { 0.0 };
    let eps = match model.noise {
        RangeNoise::Gaussian => {
            let sigma = model.sigma_at(true_gamma);
            if sigma > 0.0 {
                Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
            } else {
                0.0
            }
        }
        RangeNoise::Rayleigh { alpha } => {
            let var = alpha * true_gamma;
            if var > 0.0 {
                let scale = (var / (2.0 - PI / 2.0)).sqrt();
                let u: f64 = rng.random();
                scale * (-2.0 * (1.0 - u).ln()).sqrt()
            } else {
                0.0
            }
        }
    };
    (true_gamma + bias + eps).max(0.0)
}

/// One rubble loss per spot, `Uniform[0, rubble_loss_max]`, zero when disabled.
pub fn draw_rubble_losses<R: Rng + ?Sized>(n_spots: usize, model: &RangingNoiseModel, rng: &mut R) -> Vec<f64> {
    if !model.rubble_enabled || model.rubble_loss_max == 0.0 {
        return vec![0.0; n_spots];
    }
    let dist = Uniform::new_inclusive(0.0, model.rubble_loss_max).expect("valid bounds");
    (0..n_spots).map(|_| dist.sample(rng)).collect()
}

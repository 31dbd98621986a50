//! Trajectory relocation from forecast positions and the discrete PI loop on
//! the orbit radius.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{TrajectoryParams, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelocationOffsets {
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub kp: f64,
    pub ki: f64,
    pub integral_error: f64,
    /// Angular position of the UAV when the loop was last closed.
    pub omega: f64,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self { kp: 0.1, ki: 0.11, integral_error: 0.0, omega: 0.0 }
    }
}

impl ControllerState {
    pub fn new(kp: f64, ki: f64) -> Result<Self> {
        if !(kp > 0.0 && ki > 0.0) {
            return Err(param(format!("gains must be positive, got kp={kp} ki={ki}")));
        }
        Ok(Self { kp, ki, ..Self::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimates {
    /// Mean forecast user speed.
    pub v_bar_t: f64,
    /// UAV cruise speed.
    pub v_bar_d: f64,
}

impl SpeedEstimates {
    pub fn new(v_bar_t: f64, v_bar_d: f64) -> Result<Self> {
        if !(v_bar_d > 0.0) {
            return Err(param(format!("UAV speed must be positive, got {v_bar_d}")));
        }
        if !(v_bar_t >= 0.0) {
            return Err(param(format!("user speed must be non-negative, got {v_bar_t}")));
        }
        Ok(Self { v_bar_t, v_bar_d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusBounds {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for RadiusBounds {
    fn default() -> Self {
        Self { rho_min: 50.0, rho_max: 250.0 }
    }
}

impl RadiusBounds {
    pub fn clamp(&self, rho: f64) -> f64 {
        rho.clamp(self.rho_min, self.rho_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_max) {
            return Err(param(format!("bad radius bounds [{}, {}]", self.rho_min, self.rho_max)));
        }
        Ok(())
    }
}

/// Mean step length of a forecast divided by its sample period; zero for
/// fewer than two points.
pub fn estimate_user_speed(predicted: &[Vec2], sample_period: f64) -> f64 {
    if predicted.len() < 2 || !(sample_period > 0.0) {
        return 0.0;
    }
    let steps: f64 = predicted.windows(2).map(|w| w[0].dist(w[1])).sum();
    steps / (predicted.len() - 1) as f64 / sample_period
}

/// Quantities derived from a forecast before any radius smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub centroid: Vec2,
    /// Largest distance of a forecast point from the centroid.
    pub spread: f64,
    /// `(v_t / v_d) * spread`.
    pub spread_term: f64,
    /// `max(rho_min, spread_term)` clamped to the bounds.
    pub target_rho: f64,
}

pub fn summarize_forecast(predicted: &[Vec2], speeds: SpeedEstimates, bounds: RadiusBounds) -> Result<ForecastSummary> {
    if predicted.is_empty() {
        return Err(param("empty forecast"));
    }
    let n = predicted.len() as f64;
    let (sx, sy) = predicted.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    let centroid = Vec2::new(sx / n, sy / n);
    let spread = predicted.iter().map(|p| p.dist(centroid)).fold(0.0, f64::max);
    let spread_term = speeds.v_bar_t / speeds.v_bar_d * spread;
    Ok(ForecastSummary { centroid, spread, spread_term, target_rho: bounds.clamp(spread_term.max(bounds.rho_min)) })
}

/// One unsmoothed relocation: the center jumps to the forecast centroid and
/// the radius to the target radius. Altitude and perturbation are kept.
pub fn relocate(
    params: &TrajectoryParams,
    predicted: &[Vec2],
    speeds: SpeedEstimates,
    bounds: RadiusBounds,
) -> Result<(TrajectoryParams, RelocationOffsets)> {
    bounds.validate()?;
    let s = summarize_forecast(predicted, speeds, bounds)?;
    let off = RelocationOffsets {
        delta_x: s.centroid.x - params.x_c,
        delta_y: s.centroid.y - params.y_c,
        delta_rho: s.target_rho - params.rho,
    };
    Ok((apply_offsets(params, off, bounds), off))
}

pub fn apply_offsets(params: &TrajectoryParams, off: RelocationOffsets, bounds: RadiusBounds) -> TrajectoryParams {
    let mut next = *params;
    next.x_c += off.delta_x;
    next.y_c += off.delta_y;
    next.rho = bounds.clamp(next.rho + off.delta_rho);
    next.a = next.a.min(0.5 * next.rho);
    next
}

/// Discrete PI law `C(z) = Kp + Ki / (z - 1)`: accumulates `error` and
/// returns `kp * error + ki * integral`.
pub fn pi_step(state: &mut ControllerState, error: f64) -> f64 {
    state.integral_error += error;
    state.kp * error + state.ki * state.integral_error
}

/// Everything computed while closing the loop once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub revolution: usize,
    pub forecast: ForecastSummary,
    pub radius_error: f64,
    pub control_output: f64,
    pub offsets: RelocationOffsets,
    pub params: TrajectoryParams,
    pub integral_error: f64,
    /// Mean localization error of the revolution just finished.
    pub mean_error: f64,
    pub saturated: bool,
}

/// Relocation smoothed by the PI loop. The center moves to the forecast
/// centroid; the radius error `rho - target_rho` is driven through
/// [`pi_step`] and the radius reduced by the control output. When the
/// clamp saturates, the integral is recomputed so the output matches the
/// applied change.
pub fn closed_loop_step(
    params: &TrajectoryParams,
    ctrl: &mut ControllerState,
    predicted: &[Vec2],
    speeds: SpeedEstimates,
    bounds: RadiusBounds,
) -> Result<(TrajectoryParams, ControlRecord)> {
    bounds.validate()?;
    let forecast = summarize_forecast(predicted, speeds, bounds)?;
    let error = params.rho - forecast.target_rho;
    let mut u = pi_step(ctrl, error);
    let span = bounds.rho_max - bounds.rho_min;
    if ctrl.ki * ctrl.integral_error.abs() > span {
        ctrl.integral_error = ctrl.integral_error.signum() * span / ctrl.ki;
        u = ctrl.kp * error + ctrl.ki * ctrl.integral_error;
    }
    let unclamped = params.rho - u;
    let rho = bounds.clamp(unclamped);
    let saturated = rho != unclamped;
    if saturated {
        ctrl.integral_error = (params.rho - rho - ctrl.kp * error) / ctrl.ki;
        u = params.rho - rho;
    }
    let offsets = RelocationOffsets {
        delta_x: forecast.centroid.x - params.x_c,
        delta_y: forecast.centroid.y - params.y_c,
        delta_rho: rho - params.rho,
    };
    let next = apply_offsets(params, offsets, bounds);
    let record = ControlRecord {
        revolution: 0,
        forecast,
        radius_error: error,
        control_output: u,
        offsets,
        params: next,
        integral_error: ctrl.integral_error,
        mean_error: f64::NAN,
        saturated,
    };
    Ok((next, record))
}

/// Controller trace with columns `revolution,x_c,y_c,rho,mean_error,integral_error`.
pub fn write_trace_csv<W: Write>(records: &[ControlRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["revolution", "x_c", "y_c", "rho", "mean_error", "integral_error"])?;
    for r in records {
        w.write_record([
            r.revolution.to_string(),
            r.params.x_c.to_string(),
            r.params.y_c.to_string(),
            r.params.rho.to_string(),
            r.mean_error.to_string(),
            r.integral_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::sim::{estimate_track, predict, EstimatorSettings, Models, RangeSynth};
use crate::control::{closed_loop_step, estimate_user_speed, write_trace_csv, ControlRecord, ControllerState, SpeedEstimates};
use crate::error::{Error, Result};
use crate::geometry::{gen_uav_trajectory, TrajectoryParams, Vec2};
use crate::metrics::TrackError;
use crate::mobility::{MobilityTrace, UserTrack};
use crate::rng;

/// Everything observed and decided during one revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevolutionRecord {
    pub revolution: usize,
    /// Orbit flown during this revolution.
    pub params: TrajectoryParams,
    pub true_track: Vec<Vec2>,
    pub estimated_track: Vec<Vec2>,
    pub predicted: Vec<Vec2>,
    pub error: TrackError,
    /// Distance from the orbit center to the target at the end of the revolution.
    pub center_error: f64,
    /// Simulated start time and duration, seconds.
    pub start_time: f64,
    pub duration: f64,
    /// Relocation applied after this revolution, absent for the last one.
    pub control: Option<ControlRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub config_hash: String,
    pub records: Vec<RevolutionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevolutionSummary {
    pub revolution: usize,
    pub mean_error: f64,
    pub si: f64,
    pub rho: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub revolutions: Vec<RevolutionSummary>,
}

impl EpisodeLog {
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            schema_version: 1,
            config_hash: self.config_hash.clone(),
            revolutions: self
                .records
                .iter()
                .map(|r| RevolutionSummary {
                    revolution: r.revolution,
                    mean_error: r.error.mean,
                    si: r.error.si,
                    rho: r.params.rho,
                    center: [r.params.x_c, r.params.y_c],
                })
                .collect(),
        }
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn mean_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error.mean).collect()
    }

    /// Controller trace, one row per applied relocation.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<ControlRecord> = self.records.iter().filter_map(|r| r.control).collect();
        write_trace_csv(&rows, out)
    }

    /// True and estimated tracks of every revolution, columns
    /// `revolution,n,x,y,x_hat,y_hat`.
    pub fn write_tracks_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["revolution", "n", "x", "y", "x_hat", "y_hat"])?;
        for r in &self.records {
            for (n, (t, e)) in r.true_track.iter().zip(&r.estimated_track).enumerate() {
                w.write_record([
                    r.revolution.to_string(),
                    n.to_string(),
                    t.x.to_string(),
                    t.y.to_string(),
                    e.x.to_string(),
                    e.y.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// The true target track over the whole episode as `n,x,y`.
    pub fn user_track(&self) -> UserTrack {
        let period = self.records.first().map_or(1.0, |r| r.duration / r.true_track.len().max(1) as f64);
        UserTrack {
            positions: self.records.iter().flat_map(|r| r.true_track.iter().map(|p| p.with_z(0.0))).collect(),
            sample_period: period,
        }
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        self.write_trace_csv(std::fs::File::create(dir.join("controller_trace.csv"))?)?;
        self.write_tracks_csv(std::fs::File::create(dir.join("tracks.csv"))?)?;
        self.user_track().write_csv(std::fs::File::create(dir.join("user_track.csv"))?)?;
        Ok(())
    }
}

fn at_revolution(revolution: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Revolution { revolution, source: Box::new(e) }
}

/// Runs the closed loop: fly, measure, estimate, forecast, relocate.
pub fn run_episode(cfg: &Config, models: &Models) -> Result<EpisodeLog> {
    cfg.validate()?;
    models.check(cfg)?;
    let e = &cfg.episode;
    let trace = MobilityTrace::new(&cfg.mobility)?;
    let synth = RangeSynth::new(cfg)?;
    let settings = EstimatorSettings::from_config(cfg);
    let bounds = cfg.control.bounds();
    let t = &cfg.trajectory;
    let origin = if t.relative_to_target { trace.position_at(0.0) } else { Vec2::default() };
    let mut params = TrajectoryParams { x_c: origin.x + t.x_c, y_c: origin.y + t.y_c, h: t.h, rho: t.rho, a: t.a, n_spots: e.n_spots };
    params.validate_within(bounds.rho_min, bounds.rho_max)?;
    let mut ctrl = ControllerState::new(cfg.control.kp, cfg.control.ki)?;
    let horizon = cfg.horizon();
    let mut time = 0.0;
    let mut records = Vec::with_capacity(e.revolutions);

    for r in 0..e.revolutions {
        let wrap = at_revolution(r + 1);
        let mut rng = rng::stream(e.seed, r as u64);
        let path = gen_uav_trajectory(&params).map_err(&wrap)?;
        let duration = path.closed_length() / cfg.control.uav_speed;
        let period = duration / e.n_spots as f64;
        let true_track = trace.sample(time, period, e.n_spots);
        let phi = synth.phi(&path, &true_track, e.n_meas, &mut rng).map_err(&wrap)?;
        let estimated_track = estimate_track(&phi, &settings, models, true_track[0]).map_err(&wrap)?;
        let error = TrackError::new(&true_track, &estimated_track).map_err(&wrap)?;
        let predicted = predict(e.predictor, &estimated_track, horizon, models).map_err(&wrap)?;
        let end_target = trace.position_at(time + duration);
        let mut record = RevolutionRecord {
            revolution: r + 1,
            params,
            true_track,
            estimated_track,
            predicted,
            center_error: params.center().dist(end_target),
            start_time: time,
            duration,
            error,
            control: None,
        };
        time += duration;
        if r + 1 < e.revolutions && cfg.control.enabled {
            let speeds = SpeedEstimates::new(estimate_user_speed(&record.predicted, period), cfg.control.uav_speed).map_err(&wrap)?;
            ctrl.omega = crate::geometry::spot_angle(e.n_spots, e.n_spots) % std::f64::consts::TAU;
            let (next, mut c) = closed_loop_step(&params, &mut ctrl, &record.predicted, speeds, bounds).map_err(&wrap)?;
            c.revolution = r + 1;
            c.mean_error = record.error.mean;
            record.control = Some(c);
            params = next;
        }
        records.push(record);
    }
    Ok(EpisodeLog { config_hash: cfg.hash(), records })
}

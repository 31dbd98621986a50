use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Config, EstimatorKind};
use super::episode::run_episode;
use super::sim::Models;
use crate::error::Result;
use crate::mobility::MobilityModel;
use crate::par::{self, Exec};
use crate::rng;

/// One point of a sweep: a named knob set to `value` on top of a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub value: f64,
    pub cfg: Config,
}

impl Scenario {
    fn new(base: &Config, name: &str, value: f64, edit: impl FnOnce(&mut Config)) -> Self {
        let mut cfg = base.clone();
        edit(&mut cfg);
        Self { name: name.to_string(), value, cfg }
    }
}

/// Raw result of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scenario: String,
    pub value: f64,
    pub episode: usize,
    pub estimator: String,
    /// Mean over revolutions of the per-revolution mean error.
    pub mean_error: f64,
    pub si: f64,
    pub final_rho: f64,
}

pub const WAYPOINT_COUNTS: [usize; 3] = [100, 500, 1900];
pub const USER_SPEEDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const ALTITUDES: [f64; 4] = [50.0, 100.0, 150.0, 200.0];

/// The standard sweep: route size, rubble on/off, user speed, altitude,
/// and a static user.
pub fn scenario_matrix(base: &Config) -> Vec<Scenario> {
    let mut out = Vec::new();
    for w in WAYPOINT_COUNTS {
        out.push(Scenario::new(base, "waypoints", w as f64, |c| c.mobility.num_waypoints = w));
    }
    for on in [false, true] {
        out.push(Scenario::new(base, "rubble", f64::from(u8::from(on)), |c| c.noise.rubble_enabled = on));
    }
    for v in USER_SPEEDS {
        out.push(Scenario::new(base, "user_speed", v, |c| c.mobility.mean_speed = v));
    }
    for h in ALTITUDES {
        out.push(Scenario::new(base, "altitude", h, |c| c.trajectory.h = h));
    }
    out.push(static_user(base));
    out
}

pub fn static_user(base: &Config) -> Scenario {
    Scenario::new(base, "static_user", 0.0, |c| c.mobility.model = MobilityModel::Static)
}

/// Runs every scenario `episodes` times per estimator. Episode `k` uses seed
/// `derive_seed(base_seed, k)` for both ranging and mobility, so all
/// estimators see the same targets.
pub fn evaluate(scenarios: &[Scenario], estimators: &[EstimatorKind], episodes: usize, models: &Models, exec: Exec) -> Result<Vec<EvalRow>> {
    let mut jobs = Vec::new();
    for s in scenarios {
        for &est in estimators {
            let mut cfg = s.cfg.clone();
            cfg.episode.estimator = est;
            models.check(&cfg)?;
            for k in 0..episodes {
                jobs.push((s, est, k, cfg.clone()));
            }
        }
    }
    par::try_map_slice(exec, &jobs, |(s, est, k, cfg)| {
        let mut cfg = cfg.clone();
        let seed = rng::derive_seed(cfg.episode.seed, *k as u64);
        cfg.episode.seed = seed;
        cfg.mobility.seed = seed;
        let log = run_episode(&cfg, models)?;
        let n = log.records.len() as f64;
        Ok(EvalRow {
            scenario: s.name.clone(),
            value: s.value,
            episode: *k,
            estimator: est.to_string(),
            mean_error: log.records.iter().map(|r| r.error.mean).sum::<f64>() / n,
            si: log.records.iter().map(|r| r.error.si).sum::<f64>() / n,
            final_rho: log.records.last().map_or(f64::NAN, |r| r.params.rho),
        })
    })
}

/// Columns `scenario,value,episode,estimator,mean_error,si,final_rho`.
pub fn write_eval_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn small() -> Config {
        let mut cfg = Config::default();
        cfg.episode.n_spots = 12;
        cfg.episode.n_meas = 4;
        cfg.episode.revolutions = 2;
        cfg.mobility.num_waypoints = 20;
        cfg
    }

    #[test]
    fn matrix_covers_sweeps() {
        let m = scenario_matrix(&small());
        let count = |n: &str| m.iter().filter(|s| s.name == n).count();
        assert_eq!(count("waypoints"), 3);
        assert_eq!(count("rubble"), 2);
        assert_eq!(count("static_user"), 1);
        assert!(m.iter().any(|s| s.cfg.mobility.num_waypoints == 1900));
    }

    #[test]
    fn rows_and_missing_model() {
        let sc = vec![static_user(&small())];
        let rows = evaluate(&sc, &[EstimatorKind::Greedy, EstimatorKind::MultilatBaseline], 2, &Models::default(), Exec::Parallel).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_eval_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,value,episode,estimator,mean_error,si,final_rho\n"));
        let err = evaluate(&sc, &[EstimatorKind::Cnn], 1, &Models::default(), Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}

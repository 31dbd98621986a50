//! Ground-target motion: static victims, polygonal walks and a simplified
//! SLAW (self-similar least-action walk) generator.
//!
//! SLAW waypoints come from a three-level cluster-of-clusters process: four
//! cluster cells per level, each child cell placed uniformly inside its parent
//! with a quarter of its side, waypoints jittered uniformly inside the leaf
//! cells. The walker visits the nearest unvisited waypoint next, never pauses,
//! and keeps a constant speed. When the tour is exhausted it walks it back in
//! reverse, so a trace can be queried at any time.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{Vec2, Vec3};
use crate::rng;

const SLAW_LEVELS: usize = 3;
const SLAW_BRANCHING: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityModel {
    Static,
    Polyline,
    Slaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    pub model: MobilityModel,
    pub num_waypoints: usize,
    /// Side of the square area `[0, area_side]^2`.
    pub area_side: f64,
    /// Walking speed, m/s.
    pub mean_speed: f64,
    pub seed: u64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self { model: MobilityModel::Slaw, num_waypoints: 100, area_side: 1000.0, mean_speed: 1.0, seed: 0 }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed >= 0.0 && self.mean_speed.is_finite()) {
            return Err(param(format!("mean_speed must be >= 0, got {}", self.mean_speed)));
        }
        if self.num_waypoints < 1 {
            return Err(param("num_waypoints must be >= 1"));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(param(format!("area_side must be > 0, got {}", self.area_side)));
        }
        Ok(())
    }
}

/// Target positions sampled every `sample_period` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTrack {
    pub positions: Vec<Vec3>,
    pub sample_period: f64,
}

impl UserTrack {
    pub fn xy(&self) -> Vec<Vec2> {
        self.positions.iter().map(|p| p.xy()).collect()
    }

    /// Writes the track as CSV with header `n,x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "x", "y"])?;
        for (i, p) in self.positions.iter().enumerate() {
            w.write_record([i.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A continuous-time walk along a fixed route at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    route: Vec<Vec2>,
    /// `cumulative[i]` is the arc length from `route[0]` to `route[i]`.
    cumulative: Vec<f64>,
    speed: f64,
}

impl MobilityTrace {
    pub fn new(cfg: &MobilityConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::from_seed(cfg.seed);
        let route = match cfg.model {
            MobilityModel::Static => vec![uniform_point(&mut rng, Vec2::new(0.0, 0.0), cfg.area_side)],
            MobilityModel::Polyline => (0..cfg.num_waypoints)
                .map(|_| uniform_point(&mut rng, Vec2::new(0.0, 0.0), cfg.area_side))
                .collect(),
            MobilityModel::Slaw => nearest_neighbor_tour(&slaw_waypoints(&mut rng, cfg)),
        };
        let speed = if cfg.model == MobilityModel::Static { 0.0 } else { cfg.mean_speed };
        Ok(Self::from_route(route, speed))
    }

    pub fn from_route(route: Vec<Vec2>, speed: f64) -> Self {
        assert!(!route.is_empty(), "route must have at least one point");
        let mut cumulative = Vec::with_capacity(route.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in route.windows(2) {
            acc += w[0].dist(w[1]);
            cumulative.push(acc);
        }
        Self { route, cumulative, speed }
    }

    pub fn route(&self) -> &[Vec2] {
        &self.route
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn route_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position after walking for `t` seconds.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let total = self.route_length();
        if total == 0.0 || self.speed == 0.0 || t <= 0.0 {
            return self.route[0];
        }
        let mut s = (self.speed * t) % (2.0 * total);
        if s > total {
            s = 2.0 * total - s;
        }
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.route[i],
            Err(i) => i - 1,
        };
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let frac = (s - self.cumulative[i]) / seg;
        self.route[i] + (self.route[i + 1] - self.route[i]) * frac
    }

    /// Samples `n` positions at times `t0 + k * period`.
    pub fn sample(&self, t0: f64, period: f64, n: usize) -> Vec<Vec2> {
        (0..n).map(|k| self.position_at(t0 + k as f64 * period)).collect()
    }
}

/// Generates `n_samples` target positions spaced `sample_period` seconds apart.
pub fn gen_track(cfg: &MobilityConfig, n_samples: usize, sample_period: f64) -> Result<UserTrack> {
    if n_samples < 1 {
        return Err(param("n_samples must be >= 1"));
    }
    if !(sample_period > 0.0 && sample_period.is_finite()) {
        return Err(param(format!("sample_period must be > 0, got {sample_period}")));
    }
    let trace = MobilityTrace::new(cfg)?;
    let positions = trace.sample(0.0, sample_period, n_samples).into_iter().map(|p| p.with_z(0.0)).collect();
    Ok(UserTrack { positions, sample_period })
}

fn uniform_point<R: Rng>(rng: &mut R, origin: Vec2, side: f64) -> Vec2 {
    Vec2::new(origin.x + rng.random::<f64>() * side, origin.y + rng.random::<f64>() * side)
}

/// Cluster-of-clusters waypoints inside `[0, area_side]^2`.
pub fn slaw_waypoints<R: Rng>(rng: &mut R, cfg: &MobilityConfig) -> Vec<Vec2> {
    // cells[level] holds (origin, side) for every cell at that level
    let mut level: Vec<(Vec2, f64)> = vec![(Vec2::new(0.0, 0.0), cfg.area_side)];
    for _ in 0..SLAW_LEVELS {
        let mut next = Vec::with_capacity(level.len() * SLAW_BRANCHING);
        for &(origin, side) in &level {
            let child = side / SLAW_BRANCHING as f64;
            for _ in 0..SLAW_BRANCHING {
                next.push((uniform_point(rng, origin, side - child), child));
            }
        }
        level = next;
    }
    (0..cfg.num_waypoints)
        .map(|_| {
            let (origin, side) = level[rng.random_range(0..level.len())];
            uniform_point(rng, origin, side)
        })
        .collect()
}

/// Greedy nearest-unvisited ordering starting from the first waypoint.
pub fn nearest_neighbor_tour(points: &[Vec2]) -> Vec<Vec2> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut visited = vec![false; points.len()];
    let mut order = Vec::with_capacity(points.len());
    let mut cur = 0;
    visited[0] = true;
    order.push(points[0]);
    for _ in 1..points.len() {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, p) in points.iter().enumerate() {
            if !visited[j] {
                let d = points[cur].dist(*p);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(points[best]);
        cur = best;
    }
    order
}

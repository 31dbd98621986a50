//! Coordinate types, the perturbed circular UAV orbit and true slant ranges.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};

/// A point in the horizontal plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn with_z(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// A 3D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Descriptor of a closed, sinusoidally perturbed circular orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub x_c: f64,
    pub y_c: f64,
    /// Flight altitude.
    pub h: f64,
    /// Nominal radius.
    pub rho: f64,
    /// Amplitude of the radial perturbation.
    pub a: f64,
    pub n_spots: usize,
}

impl TrajectoryParams {
    pub fn circle(center: Vec2, h: f64, rho: f64, n_spots: usize) -> Self {
        Self { x_c: center.x, y_c: center.y, h, rho, a: 0.0, n_spots }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x_c, self.y_c)
    }

    pub fn with_center(mut self, c: Vec2) -> Self {
        self.x_c = c.x;
        self.y_c = c.y;
        self
    }

    /// Checks the orbit invariants. `a = 0` (a plain circle) is accepted.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_c, self.y_c, self.h, self.rho, self.a].iter().all(|v| v.is_finite());
        if !finite {
            return Err(param("trajectory parameters must be finite"));
        }
        if self.n_spots < 2 {
            return Err(param(format!("need at least 2 spots, got {}", self.n_spots)));
        }
        if self.h <= 0.0 {
            return Err(param(format!("altitude must be positive, got {}", self.h)));
        }
        if self.rho <= 0.0 {
            return Err(param(format!("radius must be positive, got {}", self.rho)));
        }
        if self.a < 0.0 || self.a >= self.rho {
            return Err(param(format!(
                "perturbation must satisfy 0 <= a < rho (a={}, rho={})",
                self.a, self.rho
            )));
        }
        Ok(())
    }

    /// As [`validate`](Self::validate), additionally enforcing `rho_min <= rho <= rho_max`.
    pub fn validate_within(&self, rho_min: f64, rho_max: f64) -> Result<()> {
        self.validate()?;
        if self.rho < rho_min || self.rho > rho_max {
            return Err(param(format!(
                "radius {} outside [{rho_min}, {rho_max}]",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Ordered measurement spots of one revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavPath {
    pub spots: Vec<Vec3>,
}

impl UavPath {
    pub fn len(&self) -> usize {
        self.spots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spots.is_empty()
    }

    /// Perimeter of the closed polygon through the spots.
    pub fn closed_length(&self) -> f64 {
        let n = self.spots.len();
        (0..n).map(|i| self.spots[i].dist(self.spots[(i + 1) % n])).sum()
    }
}

/// Angle of spot `n` (1-indexed) on the orbit.
pub fn spot_angle(n: usize, n_spots: usize) -> f64 {
    TAU * n as f64 / n_spots as f64
}

/// Generates the `N` equally spaced spots of the perturbed orbit. Spot `n`
/// (1-indexed) sits at radius `rho + a sin(2 pi n / N)` and angle `2 pi n / N`.
pub fn gen_uav_trajectory(params: &TrajectoryParams) -> Result<UavPath> {
    params.validate()?;
    let spots = (1..=params.n_spots)
        .map(|n| {
            let phi = spot_angle(n, params.n_spots);
            let r = params.rho + params.a * phi.sin();
            Vec3::new(r * phi.cos() + params.x_c, r * phi.sin() + params.y_c, params.h)
        })
        .collect();
    Ok(UavPath { spots })
}

/// Euclidean distance from each spot to the simultaneous target position.
pub fn true_ranges(path: &UavPath, target_track: &[Vec3]) -> Result<Vec<f64>> {
    if path.spots.len() != target_track.len() {
        return Err(shape(format!(
            "{} spots but {} target positions",
            path.spots.len(),
            target_track.len()
        )));
    }
    Ok(path.spots.iter().zip(target_track).map(|(s, t)| s.dist(*t)).collect())
}

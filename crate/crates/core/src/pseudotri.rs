//! Single-anchor pseudo-trilateration.
//!
//! Every range taken at a measurement spot pins the ground target to a circle
//! around the spot's horizontal position. The target track is the chain of
//! one point per circle with the smallest total path length. The continuous
//! problem is NP-hard, so two solvers are provided: a greedy chain that
//! projects the previous point onto the next circle, and an exact dynamic
//! program over an angular discretisation of every circle, used as an oracle.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};
use crate::geometry::{UavPath, Vec2, Vec3};

/// Work budget of the DP oracle, in `N * bins^2` edge relaxations.
pub const DP_BUDGET: usize = 60_000_000;

/// Distance from the best-fit line under which spots count as collinear, meters.
pub const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleCircle {
    pub center: Vec2,
    pub radius: f64,
}

impl FeasibleCircle {
    /// Point of the circle at `angle` in its local frame (0 = +x).
    pub fn point_at(&self, angle: f64) -> Vec2 {
        self.center + Vec2::new(angle.cos(), angle.sin()) * self.radius
    }

    /// Nearest point of the circle to `p`. From the exact center every point
    /// is equally near; the angle-0 point is returned.
    pub fn project(&self, p: Vec2) -> Vec2 {
        let d = p - self.center;
        let n = d.norm();
        if n == 0.0 {
            return self.point_at(0.0);
        }
        self.center + d * (self.radius / n)
    }

    /// Distance of `p` from the circle line.
    pub fn residual(&self, p: Vec2) -> f64 {
        (p.dist(self.center) - self.radius).abs()
    }
}

/// Intersection of the range sphere around `spot` with the plane
/// `z = target_alt`. The radius is clamped to zero when the range is shorter
/// than the vertical offset.
pub fn feasible_circle(spot: Vec3, gamma_hat: f64, target_alt: f64) -> FeasibleCircle {
    let dz = spot.z - target_alt;
    FeasibleCircle { center: spot.xy(), radius: (gamma_hat * gamma_hat - dz * dz).max(0.0).sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTriInstance {
    pub spots: UavPath,
    pub ranges: Vec<f64>,
    pub target_altitude: f64,
}

impl PseudoTriInstance {
    pub fn new(spots: UavPath, ranges: Vec<f64>, target_altitude: f64) -> Result<Self> {
        if spots.len() != ranges.len() {
            return Err(shape(format!("{} spots but {} ranges", spots.len(), ranges.len())));
        }
        if spots.is_empty() {
            return Err(param("instance needs at least one spot"));
        }
        if ranges.iter().any(|r| !(*r >= 0.0)) {
            return Err(param("ranges must be non-negative"));
        }
        Ok(Self { spots, ranges, target_altitude })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn circles(&self) -> Vec<FeasibleCircle> {
        self.spots
            .spots
            .iter()
            .zip(&self.ranges)
            .map(|(s, r)| feasible_circle(*s, *r, self.target_altitude))
            .collect()
    }
}

/// How a single step contributes to the path cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCost {
    /// Euclidean step length (total path length).
    #[default]
    Distance,
    /// Squared step length.
    Squared,
}

impl StepCost {
    pub fn eval(self, a: Vec2, b: Vec2) -> f64 {
        match self {
            StepCost::Distance => a.dist(b),
            StepCost::Squared => {
                let d = a - b;
                d.dot(d)
            }
        }
    }
}

pub fn path_cost(positions: &[Vec2], cost: StepCost) -> f64 {
    positions.windows(2).map(|w| cost.eval(w[0], w[1])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrack {
    pub positions: Vec<Vec2>,
    pub path_cost: f64,
}

impl SolutionTrack {
    pub fn new(positions: Vec<Vec2>, cost: StepCost) -> Self {
        let path_cost = path_cost(&positions, cost);
        Self { positions, path_cost }
    }
}

/// Greedy chain: the first position is `init` projected onto circle 1, each
/// next one the projection of its predecessor onto the next circle.
pub fn solve_greedy(inst: &PseudoTriInstance, init: Vec2) -> SolutionTrack {
    solve_greedy_with(inst, init, StepCost::Distance)
}

pub fn solve_greedy_with(inst: &PseudoTriInstance, init: Vec2, cost: StepCost) -> SolutionTrack {
    let mut prev = init;
    let positions = inst
        .circles()
        .iter()
        .map(|c| {
            prev = c.project(prev);
            prev
        })
        .collect();
    SolutionTrack::new(positions, cost)
}

/// Repeats the greedy chain `passes` times around the closed path, each pass
/// starting from the last position of the previous one.
pub fn solve_greedy_passes(inst: &PseudoTriInstance, init: Vec2, passes: usize, cost: StepCost) -> SolutionTrack {
    let mut track = solve_greedy_with(inst, init, cost);
    for _ in 1..passes {
        let Some(&last) = track.positions.last() else { break };
        track = solve_greedy_with(inst, last, cost);
    }
    track
}

/// Candidate points of every circle: `bins` equally spaced angles starting
/// at angle 0, or the center alone for a zero-radius circle.
pub fn bin_points(circle: &FeasibleCircle, bins: usize) -> Vec<Vec2> {
    if circle.radius == 0.0 {
        return vec![circle.center];
    }
    (0..bins).map(|k| circle.point_at(TAU * k as f64 / bins as f64)).collect()
}

/// Exact minimum-cost chain over the discretised circles.
pub fn solve_dp_oracle(inst: &PseudoTriInstance, angular_bins: usize) -> Result<SolutionTrack> {
    solve_dp_oracle_with(inst, angular_bins, StepCost::Distance)
}

pub fn solve_dp_oracle_with(inst: &PseudoTriInstance, angular_bins: usize, cost: StepCost) -> Result<SolutionTrack> {
    if angular_bins < 8 {
        return Err(param(format!("angular_bins must be >= 8, got {angular_bins}")));
    }
    let work = inst.len().saturating_mul(angular_bins).saturating_mul(angular_bins);
    if work > DP_BUDGET {
        return Err(Error::Size(format!(
            "{} spots x {angular_bins}^2 bins exceeds the budget of {DP_BUDGET}",
            inst.len()
        )));
    }
    let candidates: Vec<Vec<Vec2>> = inst.circles().iter().map(|c| bin_points(c, angular_bins)).collect();
    let mut best: Vec<f64> = vec![0.0; candidates[0].len()];
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(candidates.len());
    back.push(Vec::new());
    for n in 1..candidates.len() {
        let (prev, cur) = (&candidates[n - 1], &candidates[n]);
        let mut next = vec![f64::INFINITY; cur.len()];
        let mut arg = vec![0u32; cur.len()];
        for (j, pj) in cur.iter().enumerate() {
            for (i, pi) in prev.iter().enumerate() {
                let c = best[i] + cost.eval(*pi, *pj);
                if c < next[j] {
                    next[j] = c;
                    arg[j] = i as u32;
                }
            }
        }
        best = next;
        back.push(arg);
    }
    let mut idx = best
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, c)| if *c < acc.1 { (i, *c) } else { acc })
        .0;
    let mut positions = vec![Vec2::default(); candidates.len()];
    for n in (0..candidates.len()).rev() {
        positions[n] = candidates[n][idx];
        if n > 0 {
            idx = back[n][idx] as usize;
        }
    }
    Ok(SolutionTrack::new(positions, cost))
}

/// Moves every position to the nearest discretisation point of its circle.
pub fn snap_to_bins(track: &SolutionTrack, inst: &PseudoTriInstance, angular_bins: usize, cost: StepCost) -> SolutionTrack {
    let positions = inst
        .circles()
        .iter()
        .zip(&track.positions)
        .map(|(c, p)| {
            bin_points(c, angular_bins)
                .into_iter()
                .min_by(|a, b| a.dist(*p).total_cmp(&b.dist(*p)))
                .expect("at least one candidate")
        })
        .collect();
    SolutionTrack::new(positions, cost)
}

/// The anchor line `y = r x + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorLine {
    pub r: f64,
    pub q: f64,
}

impl AnchorLine {
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        (p.y - (self.r * p.x + self.q)).abs() <= tol * (1.0 + p.y.abs())
    }

    /// Mirror image of `p` across the line.
    pub fn reflect(&self, p: Vec2) -> Vec2 {
        let k = 2.0 * (self.r * p.x - p.y + self.q) / (self.r * self.r + 1.0);
        Vec2::new(p.x - self.r * k, p.y + k)
    }
}

/// Both ground points consistent with two ranges taken from spots on a line.
/// The first result lies left of the direction `a -> b`, the second right;
/// they coincide when the target is on the line.
pub fn lemma1_two_solutions(
    spot_a: Vec3,
    spot_b: Vec3,
    gamma_a: f64,
    gamma_b: f64,
    line: AnchorLine,
) -> Result<(Vec2, Vec2)> {
    let (a, b) = (spot_a.xy(), spot_b.xy());
    if !line.contains(a, 1e-9) || !line.contains(b, 1e-9) {
        return Err(param("spots must lie on the anchor line"));
    }
    let ca = feasible_circle(spot_a, gamma_a, 0.0);
    let cb = feasible_circle(spot_b, gamma_b, 0.0);
    let d = a.dist(b);
    if d == 0.0 {
        return Err(Error::Geometry("spots coincide".into()));
    }
    let (ra, rb) = (ca.radius, cb.radius);
    let slack = 1e-9 * (d + ra + rb);
    if d > ra + rb + slack || d < (ra - rb).abs() - slack {
        return Err(Error::Geometry(format!("circles do not intersect (d={d}, ra={ra}, rb={rb})")));
    }
    let u = (b - a) * (1.0 / d);
    let along = (ra * ra - rb * rb + d * d) / (2.0 * d);
    let off = (ra * ra - along * along).max(0.0).sqrt();
    let mid = a + u * along;
    let perp = Vec2::new(-u.y, u.x);
    Ok((mid + perp * off, mid - perp * off))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambiguity {
    Unique,
    /// Two mirror solutions across the anchor line.
    Double,
    /// A whole circle around the anchor line.
    CircleOfSolutions,
}

/// Classifies a path for a ground target of known altitude: collinear
/// horizontal projections give a mirror pair, anything else is unique.
pub fn ambiguity_check(path: &UavPath) -> Result<Ambiguity> {
    if path.len() < 3 {
        return Err(param(format!("need at least 3 spots, got {}", path.len())));
    }
    let pts: Vec<Vec2> = path.spots.iter().map(|s| s.xy()).collect();
    Ok(if max_line_deviation_2d(&pts) <= COLLINEAR_TOL { Ambiguity::Double } else { Ambiguity::Unique })
}

/// As [`ambiguity_check`] with the target altitude unknown: spots on a 3D
/// line leave a circle of solutions. The mirror image across a flat orbit
/// plane lies above the UAV and is not counted.
pub fn ambiguity_check_3d(path: &UavPath) -> Result<Ambiguity> {
    if path.len() < 3 {
        return Err(param(format!("need at least 3 spots, got {}", path.len())));
    }
    Ok(if max_line_deviation_3d(&path.spots) <= COLLINEAR_TOL {
        Ambiguity::CircleOfSolutions
    } else {
        Ambiguity::Unique
    })
}

/// Largest distance of any point from the least-squares line through them.
pub fn max_line_deviation_2d(pts: &[Vec2]) -> f64 {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec2::default(), |acc, p| acc + *p) * (1.0 / n);
    let mut cov = Matrix2::zeros();
    for p in pts {
        let d = Vector2::new(p.x - c.x, p.y - c.y);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let dir = Vec2::new(eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]);
    pts.iter().map(|p| (*p - c).cross(dir).abs()).fold(0.0, f64::max)
}

pub fn max_line_deviation_3d(pts: &[Vec3]) -> f64 {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec3::default(), |acc, p| acc + *p) * (1.0 / n);
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let dir = Vec3::new(eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)], eig.eigenvectors[(2, k)]);
    pts.iter()
        .map(|p| {
            let d = *p - c;
            Vec3::new(d.y * dir.z - d.z * dir.y, d.z * dir.x - d.x * dir.z, d.x * dir.y - d.y * dir.x).norm()
        })
        .fold(0.0, f64::max)
}

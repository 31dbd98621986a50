//! Multi-anchor baseline: linearised least squares followed by damped
//! Gauss-Newton refinement of the range residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};
use crate::geometry::Vec3;

/// Relative singular-value floor below which the geometry is rank deficient.
const RANK_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<Vec3>,
    pub ranges: Vec<f64>,
}

/// Unknowns being solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveMode {
    Full3d,
    /// Horizontal position only; target altitude fixed at `z`.
    Planar { z: f64 },
}

impl SolveMode {
    fn dims(self) -> usize {
        match self {
            SolveMode::Full3d => 3,
            SolveMode::Planar { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once the accepted step is shorter than this, meters.
    pub tol: f64,
    /// Levenberg damping added to the normal matrix.
    pub regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-10, regularization: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub position: Vec3,
    /// Sum of squared range residuals at `position`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Vec3>, ranges: Vec<f64>) -> Result<Self> {
        let set = Self { anchors, ranges };
        set.check(SolveMode::Full3d)?;
        Ok(set)
    }

    /// Builds a noiseless set by forward-computing ranges to `target`.
    pub fn from_target(anchors: Vec<Vec3>, target: Vec3) -> Self {
        let ranges = anchors.iter().map(|a| a.dist(target)).collect();
        Self { anchors, ranges }
    }

    fn check(&self, mode: SolveMode) -> Result<()> {
        if self.anchors.len() != self.ranges.len() {
            return Err(shape(format!("{} anchors but {} ranges", self.anchors.len(), self.ranges.len())));
        }
        let need = mode.dims() + 1;
        if self.anchors.len() < need {
            return Err(param(format!("need at least {need} anchors, got {}", self.anchors.len())));
        }
        if self.ranges.iter().any(|r| !(*r >= 0.0)) {
            return Err(param("ranges must be non-negative"));
        }
        Ok(())
    }

    /// Sum of squared residuals `F = sum_i (|x - a_i| - r_i)^2`.
    pub fn residual(&self, x: Vec3) -> f64 {
        self.residuals(x).iter().map(|f| f * f).sum()
    }

    pub fn residuals(&self, x: Vec3) -> Vec<f64> {
        self.anchors.iter().zip(&self.ranges).map(|(a, r)| a.dist(x) - r).collect()
    }
}

fn coords(p: Vec3, dims: usize) -> [f64; 3] {
    let c = [p.x, p.y, p.z];
    let mut out = [0.0; 3];
    out[..dims].copy_from_slice(&c[..dims]);
    out
}

/// Linearised solve: subtracting the last sphere equation from the others
/// gives `S x = p` with rows `2 (a_I - a_i)` and
/// `p_i = (r_i^2 - r_I^2) - (|a_i|^2 - |a_I|^2)`.
pub fn linear_solve(set: &AnchorSet) -> Result<Vec3> {
    linear_solve_mode(set, SolveMode::Full3d)
}

pub fn linear_solve_mode(set: &AnchorSet, mode: SolveMode) -> Result<Vec3> {
    set.check(mode)?;
    let dims = mode.dims();
    // planar mode folds the known altitude offset into horizontal radii
    let sq_ranges: Vec<f64> = match mode {
        SolveMode::Full3d => set.ranges.iter().map(|r| r * r).collect(),
        SolveMode::Planar { z } => {
            set.anchors.iter().zip(&set.ranges).map(|(a, r)| (r * r - (a.z - z).powi(2)).max(0.0)).collect()
        }
    };
    let last = set.anchors.len() - 1;
    let al = coords(set.anchors[last], dims);
    let al_sq: f64 = al.iter().map(|v| v * v).sum();
    let s = DMatrix::from_fn(last, dims, |i, j| 2.0 * (al[j] - coords(set.anchors[i], dims)[j]));
    let p = DVector::from_fn(last, |i, _| {
        let ai = coords(set.anchors[i], dims);
        let ai_sq: f64 = ai.iter().map(|v| v * v).sum();
        (sq_ranges[i] - sq_ranges[last]) - (ai_sq - al_sq)
    });
    let svd = s.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if svd.singular_values.len() < dims || !(smax > 0.0) || smin / smax < RANK_TOL {
        return Err(Error::DegenerateGeometry(format!(
            "linearised system is rank deficient (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }
    let x = svd
        .solve(&p, RANK_TOL * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(match mode {
        SolveMode::Full3d => Vec3::new(x[0], x[1], x[2]),
        SolveMode::Planar { z } => Vec3::new(x[0], x[1], z),
    })
}

/// Jacobian of the residual vector: row `i` is the unit vector from anchor
/// `i` to `x` restricted to the solved coordinates (zero at an anchor).
pub fn jacobian(set: &AnchorSet, x: Vec3, mode: SolveMode) -> DMatrix<f64> {
    let dims = mode.dims();
    DMatrix::from_fn(set.anchors.len(), dims, |i, j| {
        let d = x - set.anchors[i];
        let n = d.norm();
        if n == 0.0 {
            0.0
        } else {
            coords(d, dims)[j] / n
        }
    })
}

/// Gauss-Newton refinement `r_{k+1} = r_k - (J^T J + lambda I)^{-1} J^T f`,
/// with step halving so the residual never increases.
pub fn gauss_newton_refine(set: &AnchorSet, init: Vec3, cfg: &SolverConfig) -> Result<RefineOutcome> {
    gauss_newton_refine_mode(set, init, cfg, SolveMode::Full3d)
}

pub fn gauss_newton_refine_mode(
    set: &AnchorSet,
    init: Vec3,
    cfg: &SolverConfig,
    mode: SolveMode,
) -> Result<RefineOutcome> {
    set.check(mode)?;
    if !init.is_finite() {
        return Err(param("initial point must be finite"));
    }
    if cfg.max_iter < 1 || !(cfg.tol > 0.0) || !(cfg.regularization >= 0.0) {
        return Err(param("solver config needs max_iter >= 1, tol > 0, regularization >= 0"));
    }
    let dims = mode.dims();
    let mut x = match mode {
        SolveMode::Full3d => init,
        SolveMode::Planar { z } => Vec3::new(init.x, init.y, z),
    };
    let mut f_cur = set.residual(x);
    for iter in 1..=cfg.max_iter {
        let j = jacobian(set, x, mode);
        let f = DVector::from_vec(set.residuals(x));
        let mut jtj = j.transpose() * &j;
        for d in 0..dims {
            jtj[(d, d)] += cfg.regularization;
        }
        let jtf = j.transpose() * f;
        if jtf.norm() == 0.0 {
            return Ok(RefineOutcome { position: x, residual: f_cur, iterations: iter, converged: true });
        }
        let step = jtj
            .cholesky()
            .ok_or_else(|| Error::Numerical("normal matrix J^T J is singular".into()))?
            .solve(&jtf);
        let full = step_vec(&step, dims);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = x - full * scale;
            let f_new = set.residual(cand);
            if f_new <= f_cur {
                accepted = Some((cand, f_new));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, f_new)) = accepted else {
            // no descent along the Gauss-Newton direction: local minimum
            return Ok(RefineOutcome { position: x, residual: f_cur, iterations: iter, converged: true });
        };
        let moved = (full * scale).norm();
        x = cand;
        f_cur = f_new;
        if moved < cfg.tol {
            return Ok(RefineOutcome { position: x, residual: f_cur, iterations: iter, converged: true });
        }
    }
    Ok(RefineOutcome { position: x, residual: f_cur, iterations: cfg.max_iter, converged: false })
}

fn step_vec(step: &DVector<f64>, dims: usize) -> Vec3 {
    if dims == 3 {
        Vec3::new(step[0], step[1], step[2])
    } else {
        Vec3::new(step[0], step[1], 0.0)
    }
}

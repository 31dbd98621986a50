//! Per-revolution localization error and the Similarity Index.

use serde::{Deserialize, Serialize};

use crate::error::{shape, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackError {
    pub per_spot_errors: Vec<f64>,
    pub mean: f64,
    pub si: f64,
}

impl TrackError {
    pub fn new(truth: &[Vec2], estimate: &[Vec2]) -> Result<Self> {
        let per_spot_errors = spot_errors(truth, estimate)?;
        Ok(Self { mean: mean(&per_spot_errors), si: si_of_errors(&per_spot_errors), per_spot_errors })
    }
}

pub fn spot_errors(truth: &[Vec2], estimate: &[Vec2]) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(shape(format!("{} true points but {} estimates", truth.len(), estimate.len())));
    }
    if truth.is_empty() {
        return Err(shape("empty track"));
    }
    Ok(truth.iter().zip(estimate).map(|(a, b)| a.dist(*b)).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(sum e)^2 / (N sum e^2)`; an all-zero error vector scores 1. Sums run
/// over the sorted errors so the result does not depend on spot order.
pub fn si_of_errors(errors: &[f64]) -> f64 {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s: f64 = sorted.iter().sum();
    let s2: f64 = sorted.iter().map(|e| e * e).sum();
    if s2 == 0.0 {
        return 1.0;
    }
    (s * s / (errors.len() as f64 * s2)).min(1.0)
}

pub fn similarity_index(truth: &[Vec2], estimate: &[Vec2]) -> Result<f64> {
    Ok(si_of_errors(&spot_errors(truth, estimate)?))
}

pub fn mean_localization_error(truth: &[Vec2], estimate: &[Vec2]) -> Result<f64> {
    Ok(mean(&spot_errors(truth, estimate)?))
}

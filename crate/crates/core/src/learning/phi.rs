use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};
use crate::geometry::{UavPath, Vec2, Vec3};

/// Per-revolution network input: the `N x L` range block next to the
/// `N x 3` spot coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiMatrix {
    pub n_spots: usize,
    pub n_meas: usize,
    /// Row-major `N x L`.
    pub gamma_block: Vec<f64>,
    pub spot_block: Vec<Vec3>,
}

/// Build Φ from the `N` rows of `L` ranges and the matching spots.
pub fn build_phi(ranges: &[Vec<f64>], path: &UavPath) -> Result<PhiMatrix> {
    let n = path.len();
    if ranges.len() != n {
        return Err(shape(format!("{} range rows for {n} spots", ranges.len())));
    }
    let l = ranges.first().map_or(0, Vec::len);
    if l == 0 {
        return Err(shape("range rows must be non-empty"));
    }
    let mut gamma_block = Vec::with_capacity(n * l);
    for (i, row) in ranges.iter().enumerate() {
        if row.len() != l {
            return Err(shape(format!("row {i} has {} ranges, expected {l}", row.len())));
        }
        if let Some(bad) = row.iter().find(|g| !(**g >= 0.0)) {
            return Err(param(format!("range {bad} in row {i} is not a non-negative number")));
        }
        gamma_block.extend_from_slice(row);
    }
    Ok(PhiMatrix { n_spots: n, n_meas: l, gamma_block, spot_block: path.spots.clone() })
}

impl PhiMatrix {
    pub fn cols(&self) -> usize {
        self.n_meas + 3
    }

    pub fn gamma(&self, n: usize, l: usize) -> f64 {
        self.gamma_block[n * self.n_meas + l]
    }

    pub fn gamma_row(&self, n: usize) -> &[f64] {
        &self.gamma_block[n * self.n_meas..(n + 1) * self.n_meas]
    }

    /// Horizontal centroid of the spots; the reference frame for labels.
    pub fn reference(&self) -> Vec2 {
        let n = self.spot_block.len().max(1) as f64;
        let (sx, sy) = self.spot_block.iter().fold((0.0, 0.0), |(x, y), s| (x + s.x, y + s.y));
        Vec2::new(sx / n, sy / n)
    }

    /// Dense `N x (L + 3)` matrix exactly as assembled.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_spots * self.cols());
        for (n, s) in self.spot_block.iter().enumerate() {
            out.extend_from_slice(self.gamma_row(n));
            out.extend_from_slice(&[s.x, s.y, s.z]);
        }
        out
    }

    /// Network input: ranges and spot coordinates divided by `scale`, with
    /// horizontal coordinates taken relative to [`PhiMatrix::reference`].
    pub fn normalized(&self, scale: f64) -> Vec<f64> {
        let c = self.reference();
        let mut out = Vec::with_capacity(self.n_spots * self.cols());
        for (n, s) in self.spot_block.iter().enumerate() {
            out.extend(self.gamma_row(n).iter().map(|g| g / scale));
            out.extend_from_slice(&[(s.x - c.x) / scale, (s.y - c.y) / scale, s.z / scale]);
        }
        out
    }

    /// Dense matrix divided by its largest absolute entry.
    pub fn max_abs_normalized(&self) -> Vec<f64> {
        let dense = self.to_dense();
        let m = dense.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return dense;
        }
        dense.into_iter().map(|v| v / m).collect()
    }

    /// Mean range of every row.
    pub fn row_means(&self) -> Vec<f64> {
        (0..self.n_spots).map(|n| self.gamma_row(n).iter().sum::<f64>() / self.n_meas as f64).collect()
    }
}

/// Rows whose mean range exceeds the median row mean by more than
/// `threshold` robust deviations (MAD scaled to a Gaussian sigma, floored at
/// `min_spread` meters).
pub fn stripe_rows(phi: &PhiMatrix, threshold: f64, min_spread: f64) -> Vec<usize> {
    let means = phi.row_means();
    let med = median(&means);
    let mad = median(&means.iter().map(|m| (m - med).abs()).collect::<Vec<_>>());
    let spread = (1.4826 * mad).max(min_spread);
    (0..means.len()).filter(|&i| means[i] - med > threshold * spread).collect()
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

//! Spatially-aware feature enhancement.
//!
//! Each row is replaced by the inverse-distance weighted mean of itself and every
//! neighbor strictly inside `radius`:
//!
//! ```text
//! f'_i = (w_ii f_i + Σ_{j∈N(i)} w_ij f_j) / (w_ii + Σ_{j∈N(i)} w_ij)
//! w_ij = 1 / (d(i,j)^p + ε),  w_ii = 1 / ε
//! ```
//!
//! One pass, computed from the original rows only.

use rayon::prelude::*;

use crate::datamodel::GeoCoord;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::spatial::{DistanceMetric, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeConfig {
    /// Neighborhood radius, degrees (strict `<`).
    pub radius: f64,
    /// Added to the powered distance; also fixes the self weight at `1/epsilon`.
    pub epsilon: f64,
    pub power: f64,
    pub metric: DistanceMetric,
}

impl Default for SafeConfig {
    fn default() -> Self {
        Self {
            radius: 0.01,
            epsilon: 1e-4,
            power: 1.0,
            metric: DistanceMetric::Degree,
        }
    }
}

impl SafeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radius", self.radius),
            ("epsilon", self.epsilon),
            ("power", self.power),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("safe {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Index over `coords` with cells as wide as the radius.
    pub fn build_index(&self, coords: &[GeoCoord]) -> Result<SpatialIndex> {
        self.validate()?;
        SpatialIndex::build_with_metric(coords, self.radius, self.metric)
    }
}

pub fn idw_weight(distance: f64, cfg: &SafeConfig) -> f64 {
    1.0 / (distance.powf(cfg.power) + cfg.epsilon)
}

/// Neighbor weights of row `i`, self first, unnormalized.
fn row_weights(index: &SpatialIndex, i: usize, cfg: &SafeConfig) -> Result<Vec<(usize, f64)>> {
    let nb = index.radius_query_with_distance(i, cfg.radius)?;
    let mut w = Vec::with_capacity(nb.len() + 1);
    w.push((i, idw_weight(0.0, cfg)));
    w.extend(nb.into_iter().map(|(j, d)| (j, idw_weight(d, cfg))));
    Ok(w)
}

/// Aggregates `features` (one row per indexed point) over radius neighborhoods.
pub fn safe_aggregate(features: &Matrix, index: &SpatialIndex, cfg: &SafeConfig) -> Result<Matrix> {
    cfg.validate()?;
    if features.rows() != index.len() {
        return Err(Error::dim(format!(
            "{} feature rows for an index of {} points",
            features.rows(),
            index.len()
        )));
    }
    if features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::config("features contain non-finite values"));
    }
    let d = features.cols();
    let mut out = Matrix::zeros(features.rows(), d);
    if d == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let weights = row_weights(index, i, cfg)?;
            let z: f64 = weights.iter().map(|&(_, w)| w).sum();
            for &(j, w) in &weights {
                for (o, &f) in row.iter_mut().zip(features.row(j)) {
                    *o += w * f;
                }
            }
            for o in row.iter_mut() {
                *o /= z;
            }
            Ok(())
        })?;
    Ok(out)
}

/// Direct O(n²) evaluation without an index.
pub fn safe_aggregate_bruteforce(
    features: &Matrix,
    coords: &[GeoCoord],
    cfg: &SafeConfig,
) -> Result<Matrix> {
    cfg.validate()?;
    if features.rows() != coords.len() {
        return Err(Error::dim(format!(
            "{} feature rows for {} coordinates",
            features.rows(),
            coords.len()
        )));
    }
    let n = coords.len();
    let d = features.cols();
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let mut acc: Vec<f64> = features.row(i).iter().map(|f| f / cfg.epsilon).collect();
        let mut z = 1.0 / cfg.epsilon;
        for j in 0..n {
            if j == i {
                continue;
            }
            let dist = cfg.metric.distance(coords[i], coords[j]);
            if dist < cfg.radius {
                let w = 1.0 / (dist.powf(cfg.power) + cfg.epsilon);
                z += w;
                for (a, f) in acc.iter_mut().zip(features.row(j)) {
                    *a += w * f;
                }
            }
        }
        for (o, a) in out.row_mut(i).iter_mut().zip(acc) {
            *o = a / z;
        }
    }
    Ok(out)
}

/// Normalized weights `w_ij / Z_i` for row `i`, self first.
pub fn normalized_weights(
    index: &SpatialIndex,
    i: usize,
    cfg: &SafeConfig,
) -> Result<Vec<(usize, f64)>> {
    let w = row_weights(index, i, cfg)?;
    let z: f64 = w.iter().map(|&(_, x)| x).sum();
    Ok(w.into_iter().map(|(j, x)| (j, x / z)).collect())
}

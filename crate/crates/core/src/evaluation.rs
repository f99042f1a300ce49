//! Accuracy and spatial-alignment metrics for geolocated predictions.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::datamodel::GeoCoord;
use crate::error::{Error, Result};
use crate::textio::{kv_get, parse_kv};

fn check_pair(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::dim(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// `1 − SS_res / SS_tot`, with `SS_tot` about the target mean.
pub fn r_squared(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(preds, targets)?;
    if targets.len() < 2 {
        return Err(Error::Degenerate("r² needs at least two samples".into()));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("targets have zero variance".into()));
    }
    let ss_res: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    Ok(crate::regressor::mse_loss(preds, targets)?.sqrt())
}

/// Order-1 transport cost between equal-size empirical distributions: mean
/// absolute difference of the sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "multisets of size {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Degenerate("empty multisets".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `n` directions uniform on the unit sphere, from normalized Gaussian triples.
pub fn sample_directions(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            out.push(v.map(|x| x / norm));
        }
    }
    out
}

/// Mean 1-D transport cost over explicit projection directions.
pub fn sliced_wasserstein_with_directions(
    a: &[[f64; 3]],
    b: &[[f64; 3]],
    directions: &[[f64; 3]],
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "clouds of size {} and {}",
            a.len(),
            b.len()
        )));
    }
    if directions.is_empty() {
        return Err(Error::config(
            "at least one projection direction is required",
        ));
    }
    let proj = |cloud: &[[f64; 3]], d: &[f64; 3]| -> Vec<f64> {
        cloud
            .iter()
            .map(|p| p[0] * d[0] + p[1] * d[1] + p[2] * d[2])
            .collect()
    };
    let per_dir: Vec<f64> = directions
        .par_iter()
        .map(|d| wasserstein_1d(&proj(a, d), &proj(b, d)))
        .collect::<Result<_>>()?;
    Ok(per_dir.iter().sum::<f64>() / per_dir.len() as f64)
}

/// Sliced Wasserstein distance with `n_proj` seeded random directions.
pub fn sliced_wasserstein(a: &[[f64; 3]], b: &[[f64; 3]], n_proj: usize, seed: u64) -> Result<f64> {
    if n_proj == 0 {
        return Err(Error::config("n_proj must be >= 1"));
    }
    sliced_wasserstein_with_directions(a, b, &sample_directions(n_proj, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwdConfig {
    pub n_proj: usize,
    pub seed: u64,
}

impl Default for SwdConfig {
    fn default() -> Self {
        Self {
            n_proj: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPrediction {
    pub coord: GeoCoord,
    pub predicted: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub swd: f64,
    pub n: usize,
    pub seed: u64,
    pub swd_projections: usize,
}

impl EvalReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        match self.r2 {
            Some(r2) => {
                let _ = writeln!(s, "r2={r2}");
            }
            None => s.push_str("r2=undefined\n"),
        }
        let _ = writeln!(s, "rmse={}", self.rmse);
        let _ = writeln!(s, "swd={}", self.swd);
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "swd_projections={}", self.swd_projections);
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let real = |k: &str| -> Result<f64> {
            kv_get(&kv, k)?.parse().map_err(|_| Error::Parse {
                line: 0,
                msg: format!("{k} is not a real"),
            })
        };
        let int = |k: &str| -> Result<u64> {
            kv_get(&kv, k)?.parse().map_err(|_| Error::Parse {
                line: 0,
                msg: format!("{k} is not an integer"),
            })
        };
        let r2 = match kv_get(&kv, "r2")? {
            "undefined" => None,
            _ => Some(real("r2")?),
        };
        Ok(Self {
            r2,
            rmse: real("rmse")?,
            swd: real("swd")?,
            n: int("n")? as usize,
            seed: int("seed")?,
            swd_projections: int("swd_projections")? as usize,
        })
    }
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Prediction and target clouds as (z-scored lat, z-scored lon, raw value).
///
/// Both clouds share coordinates, so z-scoring over their union equals z-scoring
/// the coordinate list once.
pub fn prediction_clouds(preds: &[GeoPrediction]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let lat = zscore(&preds.iter().map(|p| p.coord.lat).collect::<Vec<_>>());
    let lon = zscore(&preds.iter().map(|p| p.coord.lon).collect::<Vec<_>>());
    let a = preds
        .iter()
        .enumerate()
        .map(|(i, p)| [lat[i], lon[i], p.predicted])
        .collect();
    let b = preds
        .iter()
        .enumerate()
        .map(|(i, p)| [lat[i], lon[i], p.target])
        .collect();
    (a, b)
}

/// R², RMSE and SWD over held-out geolocated predictions.
pub fn evaluate(preds: &[GeoPrediction], swd: SwdConfig) -> Result<EvalReport> {
    if preds.len() < 2 {
        return Err(Error::Degenerate(
            "evaluation needs at least two predictions".into(),
        ));
    }
    if preds
        .iter()
        .any(|p| !p.predicted.is_finite() || !p.target.is_finite())
    {
        return Err(Error::config("non-finite prediction or target"));
    }
    let p: Vec<f64> = preds.iter().map(|g| g.predicted).collect();
    let t: Vec<f64> = preds.iter().map(|g| g.target).collect();
    let r2 = match r_squared(&p, &t) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let (a, b) = prediction_clouds(preds);
    Ok(EvalReport {
        r2,
        rmse: rmse(&p, &t)?,
        swd: sliced_wasserstein(&a, &b, swd.n_proj, swd.seed)?,
        n: preds.len(),
        seed: swd.seed,
        swd_projections: swd.n_proj,
    })
}

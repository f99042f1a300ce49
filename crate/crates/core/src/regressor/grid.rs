//! Cross-validated grid search over learning rate, dropout and weight decay.

use rayon::prelude::*;

use super::train::{train_regressor, TrainConfig};
use crate::error::{Error, Result};
use crate::evaluation::{r_squared, rmse};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub learning_rates: Vec<f64>,
    pub dropout_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Default for HyperGrid {
    /// The 2×2×2 grid: lr {1e-3, 1e-4}, dropout {0.3, 0.5}, weight decay {1e-3, 1e-4}.
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-3, 1e-4],
            dropout_rates: vec![0.3, 0.5],
            weight_decays: vec![1e-3, 1e-4],
        }
    }
}

impl HyperGrid {
    pub fn single(cfg: &TrainConfig) -> Self {
        Self {
            learning_rates: vec![cfg.learning_rate],
            dropout_rates: vec![cfg.dropout_rate],
            weight_decays: vec![cfg.weight_decay],
        }
    }

    /// Cells in declaration order: learning rate outermost, weight decay innermost.
    pub fn cells(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &dr in &self.dropout_rates {
                for &wd in &self.weight_decays {
                    out.push(TrainConfig {
                        learning_rate: lr,
                        dropout_rate: dr,
                        weight_decay: wd,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.dropout_rates.len() * self.weight_decays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One cross-validation fold, already featurized.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train_x: Matrix,
    pub train_y: Vec<f64>,
    pub val_x: Matrix,
    pub val_y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub config: TrainConfig,
    pub fold_r2: Vec<f64>,
    pub fold_rmse: Vec<f64>,
    pub mean_r2: f64,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// Declaration order.
    pub cells: Vec<CellScore>,
    pub best: usize,
}

impl GridOutcome {
    pub fn best_config(&self) -> &TrainConfig {
        &self.cells[self.best].config
    }

    pub fn fits(&self) -> usize {
        self.cells.iter().map(|c| c.fold_r2.len()).sum()
    }
}

/// Trains one model per (cell, fold) and picks the cell with the highest mean
/// validation R², breaking ties by lower mean RMSE and then declaration order.
///
/// Every fit uses `seed` so cells differ only in their hyperparameters. Fits run
/// in parallel; the table is assembled in declaration order.
pub fn grid_search(
    folds: &[FoldData],
    grid: &HyperGrid,
    base: &TrainConfig,
    seed: u64,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::config("hyperparameter grid is empty"));
    }
    if folds.is_empty() {
        return Err(Error::config("grid search needs at least one fold"));
    }
    let cells = grid.cells(&TrainConfig {
        seed,
        ..base.clone()
    });
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let fold = &folds[f];
            let fit = train_regressor(&fold.train_x, &fold.train_y, &cells[c])?;
            let pred = fit.model.predict(&fold.val_x)?;
            Ok((r_squared(&pred, &fold.val_y)?, rmse(&pred, &fold.val_y)?))
        })
        .collect();

    let mut scores = Vec::with_capacity(cells.len());
    let mut it = results.into_iter();
    for config in cells {
        let mut fold_r2 = Vec::with_capacity(folds.len());
        let mut fold_rmse = Vec::with_capacity(folds.len());
        for _ in 0..folds.len() {
            let (r2, e) = it.next().expect("one result per job")?;
            fold_r2.push(r2);
            fold_rmse.push(e);
        }
        let k = folds.len() as f64;
        scores.push(CellScore {
            config,
            mean_r2: fold_r2.iter().sum::<f64>() / k,
            mean_rmse: fold_rmse.iter().sum::<f64>() / k,
            fold_r2,
            fold_rmse,
        });
    }
    let best = select_best(&scores);
    Ok(GridOutcome {
        cells: scores,
        best,
    })
}

fn select_best(scores: &[CellScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        if s.mean_r2 > b.mean_r2 || (s.mean_r2 == b.mean_r2 && s.mean_rmse < b.mean_rmse) {
            best = i;
        }
    }
    best
}

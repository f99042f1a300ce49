use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{mlp_backward, ForwardMode, MlpModel};
use super::optim::{AdamW, AdamWState};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            dropout_rate: 0.3,
            weight_decay: 1e-4,
            epochs: 150,
            batch_size: 64,
            seed: 0,
            hidden_layers: vec![256, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay must be >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean minibatch training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Minibatch AdamW on MSE over raw targets.
///
/// The output bias starts at the mean training target. Sample order is reshuffled
/// every epoch and each minibatch gets a fresh dropout seed, all drawn from one
/// generator seeded by `cfg.seed`.
pub fn train_regressor(x: &Matrix, y: &[f64], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::dim(format!(
            "{} rows vs {} targets",
            x.rows(),
            y.len()
        )));
    }
    if y.len() < cfg.batch_size {
        return Err(Error::config(format!(
            "{} samples is fewer than batch_size {}",
            y.len(),
            cfg.batch_size
        )));
    }
    let mut model = MlpModel::init(x.cols(), &cfg.hidden_layers, cfg.dropout_rate, cfg.seed)?;
    model.set_output_bias(y.iter().sum::<f64>() / y.len() as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5851_f42d_4c95_7f2d));
    let opt = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let mut params = model.flatten();
    let mut state = AdamWState::new(params.len());
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(chunk);
            yb.clear();
            yb.extend(chunk.iter().map(|&i| y[i]));
            let mode = ForwardMode::Train {
                seed: rng.next_u64(),
            };
            let (loss, grad) = mlp_backward(&model, &xb, &yb, mode)?;
            total += loss * chunk.len() as f64;
            opt.step(&mut params, &grad.flatten(), &mut state);
            model.unflatten(&params);
        }
        loss_trace.push(total / y.len() as f64);
    }
    Ok(TrainOutcome { model, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_config() {
        let x = Matrix::zeros(4, 2);
        let y = [0.0; 4];
        let cfg = TrainConfig {
            batch_size: 8,
            ..Default::default()
        };
        assert!(train_regressor(&x, &y, &cfg).is_err());
        let cfg = TrainConfig {
            dropout_rate: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}

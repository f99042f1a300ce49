//! Feed-forward regressor: affine layers with rectified hidden units, inverted
//! dropout after every hidden activation and a single linear output.
//!
//! Weights are stored `(in_dim, out_dim)` row-major so a batch forward is `X·W + b`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datamodel::Dims;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::textio::{join_reals, kv_get, parse_kv, parse_real, parse_reals};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    dropout_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Dropout masks drawn from a generator seeded with the given value.
    Train {
        seed: u64,
    },
    Inference,
}

/// Gradients shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Layer>,
}

impl MlpGrad {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut v = Vec::new();
    for l in layers {
        v.extend_from_slice(l.weights.as_slice());
        v.extend_from_slice(&l.bias);
    }
    v
}

fn check_dropout(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!(
            "dropout_rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// He-initialized network with layer widths `input, hidden..., 1`. Biases start at zero.
    pub fn init(input: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        check_dropout(dropout_rate)?;
        if input == 0 || hidden.contains(&0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(li, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let gain = if li == last { 1.0 } else { 2.0 };
                let std = (gain / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Layer {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            layers,
            dropout_rate,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, dropout_rate: f64) -> Result<Self> {
        check_dropout(dropout_rate)?;
        if layers.is_empty() {
            return Err(Error::config("model needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.cols() {
                return Err(Error::dim(format!(
                    "layer {i}: bias length differs from width"
                )));
            }
            if i > 0 && layers[i - 1].weights.cols() != l.weights.rows() {
                return Err(Error::dim(format!("layer {i}: input width mismatch")));
            }
        }
        if layers.last().unwrap().weights.cols() != 1 {
            return Err(Error::dim("output layer must have width 1"));
        }
        Ok(Self {
            layers,
            dropout_rate,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weights.cols()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn unflatten(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&v[off..off + n]);
            off += n;
            let b = l.bias.len();
            l.bias.copy_from_slice(&v[off..off + b]);
            off += b;
        }
    }

    /// Sets the output bias, e.g. to the mean training target.
    pub fn set_output_bias(&mut self, b: f64) {
        self.layers.last_mut().unwrap().bias[0] = b;
    }

    /// Predictions for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x, ForwardMode::Inference)?.output)
    }

    fn forward_cached(&self, x: &Matrix, mode: ForwardMode) -> Result<Cache> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "input width {} but model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut rng = match mode {
            ForwardMode::Train { seed } if self.dropout_rate > 0.0 => {
                Some(ChaCha8Rng::seed_from_u64(seed))
            }
            _ => None,
        };
        let keep = 1.0 - self.dropout_rate;
        let n_hidden = self.layers.len() - 1;
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = linalg::matmul(acts.last().unwrap(), &layer.weights);
            for r in 0..z.rows() {
                z.row_mut(r)
                    .iter_mut()
                    .zip(&layer.bias)
                    .for_each(|(v, b)| *v += b);
            }
            if li == n_hidden {
                let output = z.into_vec();
                return Ok(Cache {
                    acts,
                    pre,
                    masks,
                    output,
                });
            }
            let mut h = z.clone();
            h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            let mask = rng.as_mut().map(|rng| {
                let m: Vec<f64> = (0..h.as_slice().len())
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                h.as_mut_slice()
                    .iter_mut()
                    .zip(&m)
                    .for_each(|(v, k)| *v *= k);
                m
            });
            pre.push(z);
            masks.push(mask);
            acts.push(h);
        }
        unreachable!("loop returns at the output layer")
    }
}

struct Cache {
    /// Inputs to each layer.
    acts: Vec<Matrix>,
    /// Hidden pre-activations.
    pre: Vec<Matrix>,
    masks: Vec<Option<Vec<f64>>>,
    output: Vec<f64>,
}

/// Prediction for a single fused input.
pub fn mlp_forward(model: &MlpModel, input: &[f64], mode: ForwardMode) -> Result<f64> {
    let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
    Ok(model.forward_cached(&x, mode)?.output[0])
}

pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::dim(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Degenerate("mse of zero samples".into()));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / preds.len() as f64)
}

/// Batch MSE and its exact gradient. `mode` must match the forward pass being
/// differentiated: the same seed reproduces the same dropout masks.
pub fn mlp_backward(
    model: &MlpModel,
    inputs: &Matrix,
    targets: &[f64],
    mode: ForwardMode,
) -> Result<(f64, MlpGrad)> {
    if inputs.rows() != targets.len() {
        return Err(Error::dim(format!(
            "{} input rows vs {} targets",
            inputs.rows(),
            targets.len()
        )));
    }
    let cache = model.forward_cached(inputs, mode)?;
    let loss = mse_loss(&cache.output, targets)?;
    let n = targets.len() as f64;
    let mut delta = Matrix::from_vec(
        targets.len(),
        1,
        cache
            .output
            .iter()
            .zip(targets)
            .map(|(p, t)| 2.0 * (p - t) / n)
            .collect(),
    )?;
    let mut grads: Vec<Layer> = Vec::with_capacity(model.layers.len());
    for li in (0..model.layers.len()).rev() {
        let layer = &model.layers[li];
        let dw = linalg::matmul_tn(&cache.acts[li], &delta);
        let mut db = vec![0.0; delta.cols()];
        for r in 0..delta.rows() {
            db.iter_mut().zip(delta.row(r)).for_each(|(b, d)| *b += d);
        }
        grads.push(Layer {
            weights: dw,
            bias: db,
        });
        if li == 0 {
            break;
        }
        let mut dh = linalg::matmul_nt(&delta, &layer.weights);
        let h = li - 1;
        if let Some(mask) = &cache.masks[h] {
            dh.as_mut_slice()
                .iter_mut()
                .zip(mask)
                .for_each(|(d, m)| *d *= m);
        }
        dh.as_mut_slice()
            .iter_mut()
            .zip(cache.pre[h].as_slice())
            .for_each(|(d, z)| {
                if *z <= 0.0 {
                    *d = 0.0
                }
            });
        delta = dh;
    }
    grads.reverse();
    Ok((loss, MlpGrad { layers: grads }))
}

/// Checkpoint text: key=value lines with layer sizes, flattened parameters,
/// dropout rate, fusion dims and the training seed.
pub fn checkpoint_to_string(
    model: &MlpModel,
    fusion_dims: Dims,
    modalities: &str,
    seed: u64,
) -> String {
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "layer_sizes={}", sizes.join(","));
    let _ = writeln!(s, "dropout_rate={}", model.dropout_rate);
    let _ = writeln!(s, "fusion_dims={fusion_dims}");
    let _ = writeln!(s, "modalities={modalities}");
    let _ = writeln!(s, "seed={seed}");
    let _ = writeln!(s, "params={}", join_reals(&model.flatten()));
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub fusion_dims: Dims,
    pub modalities: String,
    pub seed: u64,
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let kv = parse_kv(text)?;
    let bad = |k: &str| Error::Parse {
        line: 0,
        msg: format!("malformed {k}"),
    };
    let sizes: Vec<usize> = kv_get(&kv, "layer_sizes")?
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad("layer_sizes")))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(bad("layer_sizes"));
    }
    let fd: Vec<usize> = kv_get(&kv, "fusion_dims")?
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad("fusion_dims")))
        .collect::<Result<_>>()?;
    let [a, b, c] = fd[..] else {
        return Err(bad("fusion_dims"));
    };
    let dropout = parse_real(kv_get(&kv, "dropout_rate")?, 0, "dropout_rate")?;
    let params = parse_reals(kv_get(&kv, "params")?, 0, "params")?;
    let mut layers = Vec::new();
    let mut off = 0;
    for w in sizes.windows(2) {
        let nw = w[0] * w[1];
        if off + nw + w[1] > params.len() {
            return Err(bad("params"));
        }
        layers.push(Layer {
            weights: Matrix::from_vec(w[0], w[1], params[off..off + nw].to_vec())?,
            bias: params[off + nw..off + nw + w[1]].to_vec(),
        });
        off += nw + w[1];
    }
    if off != params.len() {
        return Err(bad("params"));
    }
    Ok(Checkpoint {
        model: MlpModel::from_layers(layers, dropout)?,
        fusion_dims: Dims::new(a, b, c),
        modalities: kv_get(&kv, "modalities")?.to_string(),
        seed: kv_get(&kv, "seed")?.parse().map_err(|_| bad("seed"))?,
    })
}

pub fn write_checkpoint(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

//! InfoNCE alignment of precomputed embedding pairs through linear projection
//! heads with a learnable temperature.
//!
//! For projected rows `a_i = x_i W_img`, `b_j = t_j W_txt` and cosine similarities
//! `s_ij`, the image→text loss is
//!
//! ```text
//! L = -(1/N) Σ_i log( exp(s_ii/τ) / Σ_j exp(s_ij/τ) ),   τ = exp(log_tau)
//! ```
//!
//! The symmetric variant averages this with the text→image direction.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::regressor::optim::{AdamW, AdamWState};
use crate::textio::{join_reals, kv_get, parse_kv, parse_real, parse_reals};

/// Initial temperature.
pub const INITIAL_TAU: f64 = 0.07;

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (linalg::norm(u), linalg::norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm("cosine similarity of a zero vector".into()));
    }
    Ok((linalg::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Row `i` of both matrices describes the same pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPairBatch {
    image_embs: Matrix,
    text_embs: Matrix,
}

impl EmbeddingPairBatch {
    pub fn new(image_embs: Matrix, text_embs: Matrix) -> Result<Self> {
        if image_embs.rows() != text_embs.rows() {
            return Err(Error::dim(format!(
                "{} image rows vs {} text rows",
                image_embs.rows(),
                text_embs.rows()
            )));
        }
        if image_embs.rows() == 0 {
            return Err(Error::Degenerate("empty pair batch".into()));
        }
        if image_embs.cols() == 0 || text_embs.cols() == 0 {
            return Err(Error::dim("zero-width embeddings"));
        }
        if image_embs
            .as_slice()
            .iter()
            .chain(text_embs.as_slice())
            .any(|v| !v.is_finite())
        {
            return Err(Error::config("pair embeddings contain non-finite values"));
        }
        Ok(Self {
            image_embs,
            text_embs,
        })
    }

    pub fn len(&self) -> usize {
        self.image_embs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image_embs(&self) -> &Matrix {
        &self.image_embs
    }

    pub fn text_embs(&self) -> &Matrix {
        &self.text_embs
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            image_embs: self.image_embs.select_rows(idx),
            text_embs: self.text_embs.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub image_proj: Matrix,
    pub text_proj: Matrix,
    pub log_tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub image_proj: Matrix,
    pub text_proj: Matrix,
    pub log_tau: f64,
}

impl ProjectionHead {
    /// Gaussian init with variance `1/in_dim`, temperature at [`INITIAL_TAU`].
    pub fn init(p: usize, q: usize, k: usize, seed: u64) -> Result<Self> {
        if p == 0 || q == 0 || k == 0 {
            return Err(Error::config("projection dims must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| {
            let s = 1.0 / (rows as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Matrix::from_vec(rows, cols, data).expect("sized")
        };
        Ok(Self {
            image_proj: draw(p, k),
            text_proj: draw(q, k),
            log_tau: INITIAL_TAU.ln(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn out_dim(&self) -> usize {
        self.image_proj.cols()
    }

    fn check(&self, batch: &EmbeddingPairBatch) -> Result<()> {
        if self.image_proj.cols() != self.text_proj.cols() {
            return Err(Error::dim(
                "image and text projections disagree on output width",
            ));
        }
        if batch.image_embs.cols() != self.image_proj.rows()
            || batch.text_embs.cols() != self.text_proj.rows()
        {
            return Err(Error::dim(format!(
                "head expects ({}, {}) inputs, batch has ({}, {})",
                self.image_proj.rows(),
                self.text_proj.rows(),
                batch.image_embs.cols(),
                batch.text_embs.cols()
            )));
        }
        if !self.log_tau.is_finite() {
            return Err(Error::config("log_tau is not finite"));
        }
        Ok(())
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            self.image_proj.as_slice().len() + self.text_proj.as_slice().len() + 1,
        );
        v.extend_from_slice(self.image_proj.as_slice());
        v.extend_from_slice(self.text_proj.as_slice());
        v.push(self.log_tau);
        v
    }

    pub(crate) fn unflatten(&mut self, v: &[f64]) {
        let a = self.image_proj.as_slice().len();
        let b = self.text_proj.as_slice().len();
        self.image_proj.as_mut_slice().copy_from_slice(&v[..a]);
        self.text_proj.as_mut_slice().copy_from_slice(&v[a..a + b]);
        self.log_tau = v[a + b];
    }
}

impl HeadGrad {
    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut v = self.image_proj.as_slice().to_vec();
        v.extend_from_slice(self.text_proj.as_slice());
        v.push(self.log_tau);
        v
    }
}

/// Row-normalized copy plus the original norms.
fn normalize_rows(m: &Matrix, what: &str) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let n = linalg::norm(m.row(i));
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm(format!("projected {what} row {i}")));
        }
        out.row_mut(i).iter_mut().for_each(|x| *x /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Forward {
    a_hat: Matrix,
    b_hat: Matrix,
    a_norm: Vec<f64>,
    b_norm: Vec<f64>,
    /// logits[i][j] = s_ij / τ
    logits: Matrix,
    loss: f64,
}

fn forward(head: &ProjectionHead, batch: &EmbeddingPairBatch, symmetric: bool) -> Result<Forward> {
    head.check(batch)?;
    let a = linalg::matmul(&batch.image_embs, &head.image_proj);
    let b = linalg::matmul(&batch.text_embs, &head.text_proj);
    let (a_hat, a_norm) = normalize_rows(&a, "image")?;
    let (b_hat, b_norm) = normalize_rows(&b, "text")?;
    let n = batch.len();
    let inv_tau = (-head.log_tau).exp();
    let mut logits = linalg::matmul_nt(&a_hat, &b_hat);
    logits.as_mut_slice().iter_mut().for_each(|s| *s *= inv_tau);

    let i2t: f64 = (0..n)
        .map(|i| log_sum_exp(logits.row(i).iter().copied()) - logits.get(i, i))
        .sum::<f64>()
        / n as f64;
    let loss = if symmetric {
        let t2i: f64 = (0..n)
            .map(|j| {
                let lg = &logits;
                log_sum_exp((0..n).map(move |i| lg.get(i, j))) - logits.get(j, j)
            })
            .sum::<f64>()
            / n as f64;
        0.5 * (i2t + t2i)
    } else {
        i2t
    };
    Ok(Forward {
        a_hat,
        b_hat,
        a_norm,
        b_norm,
        logits,
        loss,
    })
}

/// Image→text InfoNCE (averaged with text→image when `symmetric`).
pub fn info_nce_loss(
    head: &ProjectionHead,
    batch: &EmbeddingPairBatch,
    symmetric: bool,
) -> Result<f64> {
    Ok(forward(head, batch, symmetric)?.loss)
}

/// Loss and exact gradients with respect to both projections and `log_tau`.
pub fn info_nce_grad(
    head: &ProjectionHead,
    batch: &EmbeddingPairBatch,
    symmetric: bool,
) -> Result<(f64, HeadGrad)> {
    let fw = forward(head, batch, symmetric)?;
    let n = batch.len();
    let nf = n as f64;

    // g[i][j] = dL / dlogit_ij
    let mut g = Matrix::zeros(n, n);
    let dir_scale = if symmetric { 0.5 } else { 1.0 };
    for i in 0..n {
        let row = fw.logits.row(i);
        let lse = log_sum_exp(row.iter().copied());
        for (j, &l) in row.iter().enumerate() {
            let p = (l - lse).exp();
            let delta = if i == j { 1.0 } else { 0.0 };
            g.set(i, j, dir_scale * (p - delta) / nf);
        }
    }
    if symmetric {
        for j in 0..n {
            let lg = &fw.logits;
            let lse = log_sum_exp((0..n).map(|i| lg.get(i, j)));
            for i in 0..n {
                let p = (fw.logits.get(i, j) - lse).exp();
                let delta = if i == j { 1.0 } else { 0.0 };
                let cur = g.get(i, j);
                g.set(i, j, cur + 0.5 * (p - delta) / nf);
            }
        }
    }

    // logit = s * exp(-log_tau)  ⇒  dlogit/dlog_tau = -logit
    let d_log_tau: f64 = -g
        .as_slice()
        .iter()
        .zip(fw.logits.as_slice())
        .map(|(a, b)| a * b)
        .sum::<f64>();

    let inv_tau = (-head.log_tau).exp();
    g.as_mut_slice().iter_mut().for_each(|x| *x *= inv_tau);
    // dL/dâ = G·B̂,  dL/db̂ = Gᵀ·Â
    let d_ahat = linalg::matmul(&g, &fw.b_hat);
    let d_bhat = linalg::matmul_tn(&g, &fw.a_hat);
    let d_a = unnormalize_grad(&d_ahat, &fw.a_hat, &fw.a_norm);
    let d_b = unnormalize_grad(&d_bhat, &fw.b_hat, &fw.b_norm);

    Ok((
        fw.loss,
        HeadGrad {
            image_proj: linalg::matmul_tn(&batch.image_embs, &d_a),
            text_proj: linalg::matmul_tn(&batch.text_embs, &d_b),
            log_tau: d_log_tau,
        },
    ))
}

/// Back through `x̂ = x/‖x‖`: `dx = (dx̂ − x̂ (x̂·dx̂)) / ‖x‖`.
fn unnormalize_grad(d_hat: &Matrix, hat: &Matrix, norms: &[f64]) -> Matrix {
    let mut out = d_hat.clone();
    for (i, &n) in norms.iter().enumerate() {
        let proj = linalg::dot(hat.row(i), d_hat.row(i));
        for (o, &h) in out.row_mut(i).iter_mut().zip(hat.row(i)) {
            *o = (*o - h * proj) / n;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub symmetric: bool,
    /// Projection width.
    pub out_dim: usize,
}

impl Default for ContrastiveTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-2,
            batch_size: 16,
            seed: 0,
            symmetric: false,
            out_dim: 16,
        }
    }
}

impl ContrastiveTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch_size must be >= 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if self.out_dim == 0 {
            return Err(Error::config("out_dim must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub head: ProjectionHead,
    /// Full-set loss before training.
    pub initial_loss: f64,
    /// Full-set loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam on the InfoNCE loss.
///
/// Each epoch shuffles pair order with the seeded generator; a trailing partial
/// batch smaller than 2 is merged into the previous one.
pub fn train_projection_head(
    pairs: &EmbeddingPairBatch,
    cfg: &ContrastiveTrainConfig,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let n = pairs.len();
    if n < cfg.batch_size {
        return Err(Error::config(format!(
            "{n} pairs is fewer than batch_size {}",
            cfg.batch_size
        )));
    }
    let mut head = ProjectionHead::init(
        pairs.image_embs.cols(),
        pairs.text_embs.cols(),
        cfg.out_dim,
        cfg.seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let opt = AdamW::adam(cfg.learning_rate);
    let mut params = head.flatten();
    let mut state = AdamWState::new(params.len());
    let initial_loss = info_nce_loss(&head, pairs, cfg.symmetric)?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in batches(&order, cfg.batch_size) {
            let batch = pairs.select(chunk);
            let (_, grad) = info_nce_grad(&head, &batch, cfg.symmetric)?;
            opt.step(&mut params, &grad.flatten(), &mut state);
            head.unflatten(&params);
        }
        epoch_losses.push(info_nce_loss(&head, pairs, cfg.symmetric)?);
    }
    Ok(PretrainOutcome {
        head,
        initial_loss,
        epoch_losses,
    })
}

/// Consecutive chunks of `order`, folding a last chunk of size 1 into its predecessor.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|c| c.len() < 2) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

/// Projects and L2-normalizes image embeddings with a trained head.
pub fn project_images(head: &ProjectionHead, images: &Matrix) -> Result<Matrix> {
    if images.cols() != head.image_proj.rows() {
        return Err(Error::dim("image width does not match the head"));
    }
    Ok(normalize_rows(&linalg::matmul(images, &head.image_proj), "image")?.0)
}

/// Pairs whose text side is a fixed random rotation of the image side plus noise.
pub fn synthesize_rotation_pairs(
    n: usize,
    dim: usize,
    noise_std: f64,
    seed: u64,
) -> Result<EmbeddingPairBatch> {
    if n == 0 || dim == 0 {
        return Err(Error::config("pair count and dim must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    // Gram–Schmidt on a Gaussian matrix gives a random orthogonal map.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| normal()).collect();
        for b in &basis {
            let p = linalg::dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let nv = linalg::norm(&v);
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    let rot = Matrix::from_rows(&basis)?;
    let images: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| normal()).collect())
        .collect();
    let images = Matrix::from_rows(&images)?;
    let mut texts = linalg::matmul(&images, &rot);
    texts
        .as_mut_slice()
        .iter_mut()
        .for_each(|x| *x += noise_std * normal());
    EmbeddingPairBatch::new(images, texts)
}

/// Pair fixture text: `dims=<p>,<q>` then `pair_id|image_emb|text_emb` lines.
pub fn pairs_to_string(ids: &[String], batch: &EmbeddingPairBatch) -> String {
    let mut s = format!(
        "dims={},{}\n",
        batch.image_embs.cols(),
        batch.text_embs.cols()
    );
    for (i, id) in ids.iter().enumerate() {
        let _ = writeln!(
            s,
            "{id}|{}|{}",
            join_reals(batch.image_embs.row(i)),
            join_reals(batch.text_embs.row(i))
        );
    }
    s
}

pub fn parse_pairs_text(text: &str) -> Result<(Vec<String>, EmbeddingPairBatch)> {
    let mut lines = text.lines().enumerate();
    let meta = lines.next().map(|(_, l)| l).unwrap_or_default();
    let dims: Vec<usize> = meta
        .trim()
        .strip_prefix("dims=")
        .map(|r| r.split(',').filter_map(|p| p.trim().parse().ok()).collect())
        .unwrap_or_default();
    let [p, q] = dims[..] else {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected `dims=<p>,<q>`, got {meta:?}"),
        });
    };
    let (mut ids, mut img, mut txt) = (Vec::new(), Vec::new(), Vec::new());
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let f: Vec<&str> = l.split('|').collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, found {}", f.len()),
            });
        }
        let a = parse_reals(f[1], line, "image_emb")?;
        let b = parse_reals(f[2], line, "text_emb")?;
        if a.len() != p || b.len() != q {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "embedding widths ({}, {}) differ from dims ({p}, {q})",
                    a.len(),
                    b.len()
                ),
            });
        }
        ids.push(f[0].to_string());
        img.push(a);
        txt.push(b);
    }
    let batch = EmbeddingPairBatch::new(Matrix::from_rows(&img)?, Matrix::from_rows(&txt)?)?;
    Ok((ids, batch))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<(Vec<String>, EmbeddingPairBatch)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs_text(&text)
}

pub fn head_to_string(head: &ProjectionHead) -> String {
    format!(
        "image_rows={}\ntext_rows={}\nout_dim={}\nlog_tau={}\nimage_proj={}\ntext_proj={}\n",
        head.image_proj.rows(),
        head.text_proj.rows(),
        head.out_dim(),
        head.log_tau,
        join_reals(head.image_proj.as_slice()),
        join_reals(head.text_proj.as_slice()),
    )
}

pub fn parse_head(text: &str) -> Result<ProjectionHead> {
    let kv = parse_kv(text)?;
    let int = |k: &str| -> Result<usize> {
        kv_get(&kv, k)?.parse().map_err(|_| Error::Parse {
            line: 0,
            msg: format!("{k} is not an integer"),
        })
    };
    let (p, q, k) = (int("image_rows")?, int("text_rows")?, int("out_dim")?);
    Ok(ProjectionHead {
        image_proj: Matrix::from_vec(
            p,
            k,
            parse_reals(kv_get(&kv, "image_proj")?, 0, "image_proj")?,
        )?,
        text_proj: Matrix::from_vec(
            q,
            k,
            parse_reals(kv_get(&kv, "text_proj")?, 0, "text_proj")?,
        )?,
        log_tau: parse_real(kv_get(&kv, "log_tau")?, 0, "log_tau")?,
    })
}

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use walkclip::config::{AblationRow, RunConfig};
use walkclip::contrastive::{EmbeddingPairBatch, HeadGrad, ProjectionHead};
use walkclip::datamodel::{
    synthesize_dataset, Dataset, Dims, GeoCoord, LocationRecord, SynthConfig,
};
use walkclip::evaluation::sliced_wasserstein;
use walkclip::linalg::Matrix;
use walkclip::regressor::{mse_loss, train_regressor, AdamW, AdamWState, MlpModel, TrainConfig};
use walkclip::splits::{quartile_bins, GroupInfo, Partition, SplitPlan};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, normal_vec(rng, rows * cols)).unwrap()
}

/// Points in a square of side `extent` anchored at `origin`.
pub fn uniform_coords(
    rng: &mut ChaCha8Rng,
    n: usize,
    origin: GeoCoord,
    extent: f64,
) -> Vec<GeoCoord> {
    (0..n)
        .map(|_| GeoCoord {
            lat: origin.lat + rng.random::<f64>() * extent,
            lon: origin.lon + rng.random::<f64>() * extent,
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Minimum mean absolute pairing cost over every permutation of `b`.
pub fn w1_bruteforce(a: &[f64], b: &[f64]) -> f64 {
    fn rec(a: &[f64], b: &mut Vec<f64>, k: usize, best: &mut f64) {
        if k == b.len() {
            let c: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
            *best = best.min(c);
            return;
        }
        for i in k..b.len() {
            b.swap(k, i);
            rec(a, b, k + 1, best);
            b.swap(k, i);
        }
    }
    let mut best = f64::INFINITY;
    rec(a, &mut b.to_vec(), 0, &mut best);
    best / a.len() as f64
}

/// Synthetic city used by the ablation-ladder experiment.
pub fn ladder_dataset(seed: u64) -> Dataset {
    synthesize_dataset(&SynthConfig {
        n_locations: 2000,
        dims: Dims::new(16, 16, 16),
        noise_std: 1.1,
        seed,
        ..Default::default()
    })
    .unwrap()
}

pub fn ladder_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        use_grid: false,
        ablation: vec![
            AblationRow::new("vision", true, true, false, false),
            AblationRow::new("vision+pdfm", true, true, true, false),
            AblationRow::new("vision+pdfm+safe", true, true, true, true),
        ],
        ..Default::default()
    };
    cfg.train.hidden_layers = vec![32, 16];
    cfg
}

pub fn small_dataset(n: usize, copies: usize, seed: u64) -> Dataset {
    synthesize_dataset(&SynthConfig {
        n_locations: n,
        dims: Dims::new(3, 2, 4),
        augment_copies: copies,
        seed,
        ..Default::default()
    })
    .unwrap()
}

pub fn head_params(h: &ProjectionHead) -> Vec<f64> {
    let mut v = h.image_proj.as_slice().to_vec();
    v.extend_from_slice(h.text_proj.as_slice());
    v.push(h.log_tau);
    v
}

pub fn with_params(h: &ProjectionHead, v: &[f64]) -> ProjectionHead {
    let a = h.image_proj.as_slice().len();
    let b = h.text_proj.as_slice().len();
    ProjectionHead {
        image_proj: Matrix::from_vec(h.image_proj.rows(), h.image_proj.cols(), v[..a].to_vec())
            .unwrap(),
        text_proj: Matrix::from_vec(h.text_proj.rows(), h.text_proj.cols(), v[a..a + b].to_vec())
            .unwrap(),
        log_tau: v[a + b],
    }
}

pub fn grad_params(g: &HeadGrad) -> Vec<f64> {
    let mut v = g.image_proj.as_slice().to_vec();
    v.extend_from_slice(g.text_proj.as_slice());
    v.push(g.log_tau);
    v
}

pub fn random_problem(
    seed: u64,
    n: usize,
    p: usize,
    q: usize,
    k: usize,
) -> (ProjectionHead, EmbeddingPairBatch) {
    let mut g = rng(seed);
    let batch =
        EmbeddingPairBatch::new(normal_matrix(&mut g, n, p), normal_matrix(&mut g, n, q)).unwrap();
    let mut head = ProjectionHead::init(p, q, k, seed + 1000).unwrap();
    head.log_tau = (0.3 + 0.7 * (seed % 7) as f64 / 7.0).ln();
    (head, batch)
}

pub fn model_with_params(m: &MlpModel, v: &[f64]) -> MlpModel {
    let mut out = m.clone();
    out.unflatten(v);
    out
}

pub fn random_model(seed: u64, input: usize, hidden: &[usize], dropout: f64) -> MlpModel {
    let mut m = MlpModel::init(input, hidden, dropout, seed).unwrap();
    let mut g = rng(seed + 50);
    let p: Vec<f64> = m
        .flatten()
        .iter()
        .map(|x| x + 0.1 * g.random::<f64>())
        .collect();
    m.unflatten(&p);
    m
}

pub fn overfit_ten_samples() -> f64 {
    let mut g = rng(21);
    let x = normal_matrix(&mut g, 10, 6);
    let y: Vec<f64> = (0..10).map(|_| g.random_range(0.0..100.0)).collect();
    let cfg = TrainConfig {
        dropout_rate: 0.0,
        weight_decay: 0.0,
        epochs: 2000,
        batch_size: 10,
        learning_rate: 1e-2,
        hidden_layers: vec![64, 32],
        ..Default::default()
    };
    let out = train_regressor(&x, &y, &cfg).unwrap();
    mse_loss(&out.model.predict(&x).unwrap(), &y).unwrap()
}

/// Two AdamW steps on `f(p) = (p − 3)² / 2` from `p = 1`, lr 0.1, decay 0.01.
pub fn adamw_hand_trace_error() -> f64 {
    let opt = AdamW::new(0.1, 0.01);
    let mut p = [1.0];
    let mut st = AdamWState::new(1);
    let mut trace = Vec::new();
    for _ in 0..2 {
        let g = [p[0] - 3.0];
        opt.step(&mut p, &g, &mut st);
        trace.push(p[0]);
    }
    // step 1: g=-2, m=-0.2, v=0.004, m̂=-2, v̂=4
    let p1 = 1.0 * (1.0 - 0.1 * 0.01) - 0.1 * (-2.0) / (2.0 + 1e-8);
    // step 2: g=p1-3
    let g2 = p1 - 3.0;
    let m2 = 0.9 * -0.2 + 0.1 * g2;
    let v2 = 0.999 * 0.004 + 0.001 * g2 * g2;
    let m_hat = m2 / (1.0 - 0.81);
    let v_hat = v2 / (1.0 - 0.999f64 * 0.999);
    let p2 = p1 * (1.0 - 0.1 * 0.01) - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
    (trace[0] - p1).abs().max((trace[1] - p2).abs())
}

pub fn cloud(g: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let v = normal_vec(g, 3);
            [v[0], v[1] + shift, v[2] * 2.0]
        })
        .collect()
}

/// Largest relative gap between SWD estimates at 10⁴ and 10⁵ projections over
/// seeded 50-point fixtures.
pub fn swd_convergence_gap() -> f64 {
    (0..3u64)
        .map(|s| {
            let mut g = rng(s);
            let a = cloud(&mut g, 50, 0.0);
            let b = cloud(&mut g, 50, 0.7);
            let lo = sliced_wasserstein(&a, &b, 10_000, s).unwrap();
            let hi = sliced_wasserstein(&a, &b, 100_000, s + 100).unwrap();
            (lo - hi).abs() / hi
        })
        .fold(0.0, f64::max)
}

pub fn singleton_dataset(scores: &[f64]) -> Dataset {
    let records = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| LocationRecord {
            record_id: format!("r{i}"),
            group_id: format!("g{i:04}"),
            coord: GeoCoord {
                lat: 44.9 + i as f64 * 1e-3,
                lon: -93.3,
            },
            sat_emb: vec![0.0],
            street_emb: vec![0.0],
            pdfm_emb: vec![0.0],
            walk_score: s,
        })
        .collect();
    Dataset::new(Dims::new(1, 1, 1), records).unwrap()
}

/// Largest deviation, in groups, of any fold's per-bin count from its share of the
/// global bin proportion.
pub fn worst_fold_imbalance(groups: &[GroupInfo], folds: &[Vec<String>]) -> f64 {
    let bin: HashMap<&str, usize> = groups
        .iter()
        .map(|g| (g.group_id.as_str(), g.bin))
        .collect();
    let mut global = [0usize; 4];
    groups.iter().for_each(|g| global[g.bin] += 1);
    let total = groups.len() as f64;
    let mut worst: f64 = 0.0;
    for f in folds {
        let mut c = [0usize; 4];
        f.iter().for_each(|g| c[bin[g.as_str()]] += 1);
        for b in 0..4 {
            let expect = f.len() as f64 * global[b] as f64 / total;
            worst = worst.max((c[b] as f64 - expect).abs());
        }
    }
    worst
}

/// Checks one plan for leakage and the hold-out fraction. Returns a failure message.
pub fn check_plan(ds: &Dataset, plan: &SplitPlan) -> Result<(), String> {
    let part: HashMap<&str, Partition> = plan
        .assignments
        .iter()
        .map(|(g, p)| (g.as_str(), *p))
        .collect();
    let groups: HashSet<&str> = ds.group_ids().into_iter().collect();
    if part.len() != groups.len() || plan.assignments.len() != groups.len() {
        return Err("every group must have exactly one partition".into());
    }
    let test = plan.test_group_ids();
    let folds = plan.folds();
    for (i, f) in folds.iter().enumerate() {
        if !f.is_disjoint(&test) {
            return Err(format!("fold {i} overlaps test"));
        }
        for (j, h) in folds.iter().enumerate().skip(i + 1) {
            if !f.is_disjoint(h) {
                return Err(format!("folds {i} and {j} overlap"));
            }
        }
    }
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for r in ds.records() {
        *sizes.entry(r.group_id.as_str()).or_default() += 1;
    }
    let test_records: usize = ds
        .records()
        .iter()
        .filter(|r| test.contains(&r.group_id))
        .count();
    let largest = *sizes.values().max().unwrap() as f64;
    let target = plan.test_fraction * ds.len() as f64;
    if (test_records as f64 - target).abs() > largest {
        return Err(format!("{test_records} test records vs target {target}"));
    }
    Ok(())
}

pub fn singleton_infos(scores: &[f64]) -> Vec<GroupInfo> {
    quartile_bins(&singleton_dataset(scores))
        .unwrap()
        .groups
        .into_iter()
        .map(|(g, bin)| GroupInfo {
            group_id: g,
            records: 1,
            bin,
        })
        .collect()
}

//! Grouped hold-out and stratified grouped k-fold planning.
//!
//! All planning happens at the group level, so every record of a location lands
//! on the same side of every boundary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::textio::{join_reals, parse_real, parse_reals};

/// Percentile of sorted data with linear interpolation between order statistics.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuartileBins {
    /// 25th, 50th and 75th percentiles of the per-group scores.
    pub edges: [f64; 3],
    /// Bin 0–3 for each group, in first-appearance order.
    pub groups: Vec<(String, usize)>,
    /// Set when two or more edges coincide.
    pub degenerate: bool,
}

impl QuartileBins {
    /// Right-closed bins: `(-∞, e0]`, `(e0, e1]`, `(e1, e2]`, `(e2, ∞)`.
    pub fn bin_of(edges: &[f64; 3], score: f64) -> usize {
        edges.iter().take_while(|&&e| score > e).count()
    }

    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for (_, b) in &self.groups {
            c[*b] += 1;
        }
        c
    }
}

/// One score per group, in first-appearance order. Groups are score-coherent in a
/// valid dataset.
fn group_scores(ds: &Dataset) -> Vec<(String, f64, usize)> {
    let mut pos: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for r in ds.records() {
        match pos.get(r.group_id.as_str()) {
            Some(&i) => out[i].2 += 1,
            None => {
                pos.insert(&r.group_id, out.len());
                out.push((r.group_id.clone(), r.walk_score, 1));
            }
        }
    }
    out
}

/// Quartile bins over unique-group scores, so augmentation multiplicity cannot
/// shift the edges.
pub fn quartile_bins(ds: &Dataset) -> Result<QuartileBins> {
    let gs = group_scores(ds);
    if gs.len() < 4 {
        return Err(Error::Degenerate(format!(
            "quartile bins need at least 4 groups, found {}",
            gs.len()
        )));
    }
    let mut sorted: Vec<f64> = gs.iter().map(|g| g.1).collect();
    sorted.sort_by(f64::total_cmp);
    let edges = [
        percentile_linear(&sorted, 0.25),
        percentile_linear(&sorted, 0.50),
        percentile_linear(&sorted, 0.75),
    ];
    let degenerate = edges[0] == edges[1] || edges[1] == edges[2];
    Ok(QuartileBins {
        edges,
        groups: gs
            .into_iter()
            .map(|(g, s, _)| (g, QuartileBins::bin_of(&edges, s)))
            .collect(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub train: HashSet<String>,
    pub test: HashSet<String>,
    pub test_records: usize,
    pub total_records: usize,
    /// Groups holding more than `1 − test_fraction` of all records.
    pub oversized_groups: Vec<String>,
}

impl GroupSplit {
    pub fn realized_fraction(&self) -> f64 {
        self.test_records as f64 / self.total_records as f64
    }
}

/// Shuffles group ids and moves them into the test side until its record count
/// first reaches `test_fraction` of all records.
pub fn group_shuffle_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<GroupSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut gs = group_scores(ds);
    let total: usize = gs.iter().map(|g| g.2).sum();
    if gs.len() < 2 {
        return Err(Error::Degenerate(
            "a hold-out split needs at least 2 groups".into(),
        ));
    }
    let oversized_groups = gs
        .iter()
        .filter(|g| g.2 as f64 > (1.0 - test_fraction) * total as f64)
        .map(|g| g.0.clone())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gs.shuffle(&mut rng);
    // Tolerance keeps e.g. 0.15 * 100 from rounding up to 16.
    let needed = ((test_fraction * total as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut test = HashSet::new();
    let mut train = HashSet::new();
    let mut test_records = 0;
    for (g, _, c) in gs {
        if test_records < needed {
            test_records += c;
            test.insert(g);
        } else {
            train.insert(g);
        }
    }
    if train.is_empty() {
        return Err(Error::Degenerate(format!(
            "test_fraction {test_fraction} leaves no training groups"
        )));
    }
    Ok(GroupSplit {
        train,
        test,
        test_records,
        total_records: total,
        oversized_groups,
    })
}

/// Input row for fold assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInfo {
    pub group_id: String,
    pub records: usize,
    pub bin: usize,
}

/// Greedy stratified grouped k-fold.
///
/// Groups are visited by record count descending, then group id ascending. Each
/// goes to the fold that minimizes the resulting total, over all folds, of the
/// squared deviations of per-fold bin record counts from `bin_total / k` plus the
/// squared deviation of the fold's record count from `total / k`. Ties go to the
/// lowest fold index. The seed then relabels the folds with a shuffle.
pub fn stratified_group_kfold(
    groups: &[GroupInfo],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::config(format!("k must be >= 2, got {k}")));
    }
    if groups.len() < k {
        return Err(Error::config(format!(
            "k = {k} exceeds the {} available groups",
            groups.len()
        )));
    }
    let n_bins = groups.iter().map(|g| g.bin + 1).max().unwrap_or(1);
    let mut bin_totals = vec![0.0; n_bins];
    for g in groups {
        bin_totals[g.bin] += g.records as f64;
    }
    let target: Vec<f64> = bin_totals.iter().map(|t| t / k as f64).collect();

    let mut order: Vec<&GroupInfo> = groups.iter().collect();
    order.sort_by(|a, b| {
        b.records
            .cmp(&a.records)
            .then_with(|| a.group_id.cmp(&b.group_id))
    });

    let size_target = bin_totals.iter().sum::<f64>() / k as f64;
    let mut counts = vec![vec![0.0; n_bins]; k];
    let mut sizes = vec![0.0; k];
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for g in order {
        let c = g.records as f64;
        // Only fold f's bin entry and size change, so compare the change in the total.
        let mut best = 0;
        let mut best_delta = f64::INFINITY;
        for f in 0..k {
            let dev = counts[f][g.bin] - target[g.bin];
            let size_dev = sizes[f] - size_target;
            let delta = (dev + c).powi(2) - dev.powi(2) + (size_dev + c).powi(2) - size_dev.powi(2);
            if delta < best_delta {
                best_delta = delta;
                best = f;
            }
        }
        counts[best][g.bin] += c;
        sizes[best] += c;
        folds[best].push(g.group_id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    folds.shuffle(&mut rng);
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Test,
    Fold(usize),
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Partition::Test => f.write_str("test"),
            Partition::Fold(i) => write!(f, "fold{i}"),
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "test" {
            return Ok(Partition::Test);
        }
        s.strip_prefix("fold")
            .and_then(|n| n.parse().ok())
            .map(Partition::Fold)
            .ok_or_else(|| Error::config(format!("unknown partition label {s:?}")))
    }
}

/// Hold-out test groups plus k folds over the remaining groups.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_fraction: f64,
    pub bin_edges: [f64; 3],
    pub degenerate_bins: bool,
    /// Every group with its partition, in dataset first-appearance order.
    pub assignments: Vec<(String, Partition)>,
    pub k: usize,
}

impl SplitPlan {
    /// Holds out `test_fraction` of records by group, bins the remaining groups by
    /// score quartile and assigns them to `k` stratified folds.
    pub fn build(ds: &Dataset, test_fraction: f64, k: usize, seed: u64) -> Result<Self> {
        let split = group_shuffle_split(ds, test_fraction, seed)?;
        let train_ds = ds.subset_by_groups(&split.train);
        let bins = quartile_bins(&train_ds)?;
        let counts: HashMap<String, usize> = group_scores(&train_ds)
            .into_iter()
            .map(|(g, _, c)| (g, c))
            .collect();
        let infos: Vec<GroupInfo> = bins
            .groups
            .iter()
            .map(|(g, b)| GroupInfo {
                group_id: g.clone(),
                records: counts[g],
                bin: *b,
            })
            .collect();
        let folds = stratified_group_kfold(&infos, k, seed.wrapping_add(1))?;
        let mut label: HashMap<&str, Partition> = HashMap::new();
        for (i, f) in folds.iter().enumerate() {
            for g in f {
                label.insert(g, Partition::Fold(i));
            }
        }
        let assignments = ds
            .group_ids()
            .into_iter()
            .map(|g| {
                let p = if split.test.contains(g) {
                    Partition::Test
                } else {
                    label[g]
                };
                (g.to_string(), p)
            })
            .collect();
        Ok(Self {
            seed,
            test_fraction,
            bin_edges: bins.edges,
            degenerate_bins: bins.degenerate,
            assignments,
            k,
        })
    }

    pub fn test_group_ids(&self) -> HashSet<String> {
        self.groups_where(|p| p == Partition::Test)
    }

    pub fn train_group_ids(&self) -> HashSet<String> {
        self.groups_where(|p| p != Partition::Test)
    }

    pub fn fold(&self, i: usize) -> HashSet<String> {
        self.groups_where(|p| p == Partition::Fold(i))
    }

    pub fn folds(&self) -> Vec<HashSet<String>> {
        (0..self.k).map(|i| self.fold(i)).collect()
    }

    fn groups_where(&self, pred: impl Fn(Partition) -> bool) -> HashSet<String> {
        self.assignments
            .iter()
            .filter(|(_, p)| pred(*p))
            .map(|(g, _)| g.clone())
            .collect()
    }

    /// Record count per partition label, for reporting.
    pub fn record_counts(&self, ds: &Dataset) -> BTreeMap<String, usize> {
        let lookup: HashMap<&str, Partition> = self
            .assignments
            .iter()
            .map(|(g, p)| (g.as_str(), *p))
            .collect();
        let mut out = BTreeMap::new();
        for r in ds.records() {
            if let Some(p) = lookup.get(r.group_id.as_str()) {
                *out.entry(p.to_string()).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "test_fraction={}", self.test_fraction);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "bin_edges={}", join_reals(&self.bin_edges));
        let _ = writeln!(s, "degenerate_bins={}", self.degenerate_bins);
        for (g, p) in &self.assignments {
            let _ = writeln!(s, "{g}|{p}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: HashMap<&str, &str> = HashMap::new();
        let mut assignments = Vec::new();
        for (i, l) in text.lines().enumerate() {
            let line = i + 1;
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            if let Some((g, p)) = l.split_once('|') {
                let part: Partition = p.parse().map_err(|e: Error| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                assignments.push((g.to_string(), part));
            } else if let Some((k, v)) = l.split_once('=') {
                header.insert(k, v);
            } else {
                return Err(Error::Parse {
                    line,
                    msg: format!("unrecognized line {l:?}"),
                });
            }
        }
        let get = |k: &str| {
            header.get(k).copied().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing {k}"),
            })
        };
        let int_err = |k: &str| Error::Parse {
            line: 0,
            msg: format!("{k} is not an integer"),
        };
        let edges = parse_reals(get("bin_edges")?, 0, "bin_edges")?;
        let bin_edges: [f64; 3] = edges.try_into().map_err(|_| Error::Parse {
            line: 0,
            msg: "bin_edges needs 3 values".into(),
        })?;
        Ok(Self {
            seed: get("seed")?.parse().map_err(|_| int_err("seed"))?,
            test_fraction: parse_real(get("test_fraction")?, 0, "test_fraction")?,
            k: get("k")?.parse().map_err(|_| int_err("k"))?,
            bin_edges,
            degenerate_bins: get("degenerate_bins")? == "true",
            assignments,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

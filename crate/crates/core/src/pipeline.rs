//! End-to-end ablation run: split, optional SAFE, fusion, grid search on folds,
//! retraining on the full training split and held-out evaluation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{AblationRow, RunConfig, SafeScope};
use crate::datamodel::{self, Dataset, GeoCoord};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport, GeoPrediction};
use crate::linalg::Matrix;
use crate::regressor::mlp::checkpoint_to_string;
use crate::regressor::{
    grid_search, train_regressor, FoldData, FusionLayout, GridOutcome, MlpModel,
};
use crate::safe::{safe_aggregate, SafeConfig};
use crate::splits::SplitPlan;
use crate::textio::parse_real;

/// SAFE-transformed satellite and street embeddings for every record of `ds`.
pub fn safe_transform(ds: &Dataset, cfg: &SafeConfig) -> Result<Dataset> {
    let index = cfg.build_index(&ds.coords())?;
    let sat = Matrix::from_rows(
        &ds.records()
            .iter()
            .map(|r| &r.sat_emb[..])
            .collect::<Vec<_>>(),
    )?;
    let street = Matrix::from_rows(
        &ds.records()
            .iter()
            .map(|r| &r.street_emb[..])
            .collect::<Vec<_>>(),
    )?;
    let sat = safe_aggregate(&sat, &index, cfg)?;
    let street = safe_aggregate(&street, &index, cfg)?;
    ds.with_vision(&sat.to_rows(), &street.to_rows())
}

/// Featurized fitting and evaluation sides of one boundary.
struct Sides {
    fit: Dataset,
    eval: Dataset,
}

fn subset(ds: &Dataset, groups: &HashSet<String>) -> Dataset {
    ds.subset_by_groups(groups)
}

/// Applies SAFE (when requested) under the configured scope.
fn featurize(
    full: &Dataset,
    transductive: Option<&Dataset>,
    fit_groups: &HashSet<String>,
    eval_groups: &HashSet<String>,
    safe: Option<(&SafeConfig, SafeScope)>,
) -> Result<Sides> {
    let Some((cfg, scope)) = safe else {
        return Ok(Sides {
            fit: subset(full, fit_groups),
            eval: subset(full, eval_groups),
        });
    };
    match scope {
        SafeScope::Transductive => {
            let t = transductive.expect("transductive transform computed up front");
            Ok(Sides {
                fit: subset(t, fit_groups),
                eval: subset(t, eval_groups),
            })
        }
        SafeScope::PerPartition => Ok(Sides {
            fit: safe_transform(&subset(full, fit_groups), cfg)?,
            eval: safe_transform(&subset(full, eval_groups), cfg)?,
        }),
        SafeScope::Inductive => {
            let union: HashSet<String> = fit_groups.union(eval_groups).cloned().collect();
            let joint = safe_transform(&subset(full, &union), cfg)?;
            Ok(Sides {
                fit: safe_transform(&subset(full, fit_groups), cfg)?,
                eval: subset(&joint, eval_groups),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct RowResult {
    pub row: AblationRow,
    pub layout_label: String,
    pub grid: GridOutcome,
    pub test: EvalReport,
    pub model: MlpModel,
    pub predictions: Vec<(String, GeoPrediction)>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SplitSummary {
    pub plan: SplitPlan,
    pub test_groups: usize,
    pub train_groups: usize,
    pub test_records: usize,
    pub total_records: usize,
    pub fold_records: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub split: SplitSummary,
    pub rows: Vec<RowResult>,
    pub total_seconds: f64,
}

impl RunReport {
    pub fn row(&self, name: &str) -> Option<&RowResult> {
        self.rows.iter().find(|r| r.row.name == name)
    }

    /// Everything except wall-clock timings; identical across reruns of one config.
    pub fn deterministic_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[config]");
        s.push_str(&self.config.to_toml());
        let _ = writeln!(s, "\n[split]");
        let sp = &self.split;
        let _ = writeln!(s, "seed={}", sp.plan.seed);
        let _ = writeln!(
            s,
            "bin_edges={},{},{}",
            sp.plan.bin_edges[0], sp.plan.bin_edges[1], sp.plan.bin_edges[2]
        );
        let _ = writeln!(s, "degenerate_bins={}", sp.plan.degenerate_bins);
        let _ = writeln!(s, "test_groups={}", sp.test_groups);
        let _ = writeln!(s, "train_groups={}", sp.train_groups);
        let _ = writeln!(s, "test_records={}", sp.test_records);
        let _ = writeln!(s, "total_records={}", sp.total_records);
        let _ = writeln!(
            s,
            "realized_test_fraction={}",
            sp.test_records as f64 / sp.total_records as f64
        );
        let fr: Vec<String> = sp.fold_records.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "fold_records={}", fr.join(","));
        let _ = writeln!(s, "safe_scope={}", self.config.safe.scope);
        for r in &self.rows {
            let _ = writeln!(s, "\n[row {}]", r.row.name);
            let _ = writeln!(s, "modalities={}", r.layout_label);
            let _ = writeln!(s, "safe={}", r.row.use_safe);
            let _ = writeln!(s, "grid_fits={}", r.grid.fits());
            let _ = writeln!(s, "# lr dropout weight_decay mean_r2 mean_rmse fold_r2");
            for (i, c) in r.grid.cells.iter().enumerate() {
                let folds: Vec<String> = c.fold_r2.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(
                    s,
                    "cell{i}={} {} {} {} {} {}",
                    c.config.learning_rate,
                    c.config.dropout_rate,
                    c.config.weight_decay,
                    c.mean_r2,
                    c.mean_rmse,
                    folds.join(",")
                );
            }
            let _ = writeln!(s, "best_cell={}", r.grid.best);
            s.push_str(&r.test.to_kv());
        }
        s
    }

    pub fn timings_text(&self) -> String {
        let mut s = String::from("[timings]\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}={:.3}", r.row.name, r.seconds);
        }
        let _ = writeln!(s, "total={:.3}", self.total_seconds);
        s
    }

    /// Test metrics of every row, one key=value block each.
    pub fn metrics_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(s, "[{}]", r.row.name);
            s.push_str(&r.test.to_kv());
        }
        s
    }
}

/// Runs every ablation row of `cfg` on `ds`. The hold-out split is computed once
/// and shared by all rows.
pub fn run(cfg: &RunConfig, ds: &Dataset) -> Result<RunReport> {
    let stage = |name: &'static str| move |e: Error| Error::config(format!("stage {name}: {e}"));
    cfg.validate().map_err(stage("config"))?;
    let started = Instant::now();
    let plan = SplitPlan::build(ds, cfg.split.test_fraction, cfg.split.k, cfg.seed)
        .map_err(stage("split"))?;
    let test_groups = plan.test_group_ids();
    let train_groups = plan.train_group_ids();
    let folds = plan.folds();
    let counts = plan.record_counts(ds);
    let split = SplitSummary {
        test_groups: test_groups.len(),
        train_groups: train_groups.len(),
        test_records: counts.get("test").copied().unwrap_or(0),
        total_records: ds.len(),
        fold_records: (0..cfg.split.k)
            .map(|i| counts.get(&format!("fold{i}")).copied().unwrap_or(0))
            .collect(),
        plan,
    };

    let safe_cfg = cfg.safe.to_config()?;
    let needs_transductive =
        cfg.safe.scope == SafeScope::Transductive && cfg.ablation.iter().any(|r| r.use_safe);
    let transductive = if needs_transductive {
        Some(safe_transform(ds, &safe_cfg).map_err(stage("safe"))?)
    } else {
        None
    };

    let grid = cfg.hyper_grid();
    let base = cfg.base_train_config();
    let mut rows = Vec::with_capacity(cfg.ablation.len());
    for row in &cfg.ablation {
        let t0 = Instant::now();
        let layout = FusionLayout::new(ds.dims(), &row.modalities())?;
        let safe = row.use_safe.then_some((&safe_cfg, cfg.safe.scope));

        let mut fold_data = Vec::with_capacity(folds.len());
        for val in &folds {
            let fit: HashSet<String> = train_groups.difference(val).cloned().collect();
            let sides =
                featurize(ds, transductive.as_ref(), &fit, val, safe).map_err(stage("safe"))?;
            fold_data.push(FoldData {
                train_x: layout.design_matrix(&sides.fit)?,
                train_y: sides.fit.scores(),
                val_x: layout.design_matrix(&sides.eval)?,
                val_y: sides.eval.scores(),
            });
        }
        let outcome =
            grid_search(&fold_data, &grid, &base, cfg.seed).map_err(stage("grid-search"))?;

        let sides = featurize(ds, transductive.as_ref(), &train_groups, &test_groups, safe)
            .map_err(stage("safe"))?;
        let x = layout.design_matrix(&sides.fit)?;
        let fit = train_regressor(&x, &sides.fit.scores(), outcome.best_config())
            .map_err(stage("train"))?;
        let test_x = layout.design_matrix(&sides.eval)?;
        let preds = fit.model.predict(&test_x)?;
        let predictions: Vec<(String, GeoPrediction)> = sides
            .eval
            .records()
            .iter()
            .zip(preds)
            .map(|(r, p)| {
                (
                    r.record_id.clone(),
                    GeoPrediction {
                        coord: r.coord,
                        predicted: p,
                        target: r.walk_score,
                    },
                )
            })
            .collect();
        let geo: Vec<GeoPrediction> = predictions.iter().map(|(_, g)| *g).collect();
        let test = evaluate(&geo, cfg.swd_config()).map_err(stage("evaluate"))?;
        rows.push(RowResult {
            row: row.clone(),
            layout_label: layout.label(),
            grid: outcome,
            test,
            model: fit.model,
            predictions,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(RunReport {
        config: cfg.clone(),
        split,
        rows,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn predictions_to_string(preds: &[(String, GeoPrediction)]) -> String {
    let mut s = String::from("columns=record_id,lat,lon,predicted,target\n");
    for (id, p) in preds {
        let _ = writeln!(
            s,
            "{id}|{}|{}|{}|{}",
            p.coord.lat, p.coord.lon, p.predicted, p.target
        );
    }
    s
}

pub fn parse_predictions(text: &str) -> Result<Vec<(String, GeoPrediction)>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        if l.trim().is_empty() || l.starts_with("columns=") || l.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = l.split('|').collect();
        if f.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 5 fields, found {}", f.len()),
            });
        }
        out.push((
            f[0].to_string(),
            GeoPrediction {
                coord: GeoCoord {
                    lat: parse_real(f[1], line, "lat")?,
                    lon: parse_real(f[2], line, "lon")?,
                },
                predicted: parse_real(f[3], line, "predicted")?,
                target: parse_real(f[4], line, "target")?,
            },
        ));
    }
    Ok(out)
}

fn write(path: &Path, text: &str, manifest: &mut Vec<(String, usize)>) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    manifest.push((name, text.len()));
    Ok(())
}

/// Writes the report, metrics, split plan, per-row predictions and checkpoints,
/// and a manifest listing them, under `dir`.
pub fn write_artifacts(report: &RunReport, ds: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::new();
    write(
        &dir.join("config.toml"),
        &report.config.to_toml(),
        &mut manifest,
    )?;
    write(
        &dir.join("split.txt"),
        &report.split.plan.to_text(),
        &mut manifest,
    )?;
    write(
        &dir.join("report.txt"),
        &report.deterministic_text(),
        &mut manifest,
    )?;
    write(
        &dir.join("metrics.txt"),
        &report.metrics_text(),
        &mut manifest,
    )?;
    write(
        &dir.join("timings.txt"),
        &report.timings_text(),
        &mut manifest,
    )?;
    for r in &report.rows {
        write(
            &dir.join(format!("predictions_{}.txt", r.row.name)),
            &predictions_to_string(&r.predictions),
            &mut manifest,
        )?;
        write(
            &dir.join(format!("model_{}.ckpt", r.row.name)),
            &checkpoint_to_string(
                &r.model,
                ds.dims(),
                &r.layout_label,
                r.grid.best_config().seed,
            ),
            &mut manifest,
        )?;
    }
    let mut m = String::new();
    for (name, len) in &manifest {
        let _ = writeln!(m, "{name}|{len}");
    }
    let mpath = dir.join("manifest.txt");
    std::fs::write(&mpath, m).map_err(|e| Error::io(&mpath, e))?;
    let mut paths: Vec<PathBuf> = manifest.iter().map(|(n, _)| dir.join(n)).collect();
    paths.push(mpath);
    Ok(paths)
}

/// Loads the dataset named in `cfg`, runs, and writes artifacts.
pub fn run_from_config(cfg: &RunConfig) -> Result<RunReport> {
    let ds = datamodel::parse_dataset(&cfg.dataset)
        .map_err(|e| Error::config(format!("stage load: {e}")))?;
    let report = run(cfg, &ds)?;
    write_artifacts(&report, &ds, &cfg.output_dir)?;
    Ok(report)
}

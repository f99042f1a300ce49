//! Command-line front end. Exit codes: 0 success, 1 validation failure, 2 runtime failure.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, SafeScope};
use crate::contrastive::{self, ContrastiveTrainConfig};
use crate::datamodel::{self, Dims, SynthConfig};
use crate::evaluation::{evaluate, GeoPrediction, SwdConfig};
use crate::pipeline;
use crate::safe::SafeConfig;
use crate::splits::SplitPlan;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "walkclip",
    version,
    about = "Spatially-aware multimodal walkability regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Check a dataset file and list every problem found.
    Validate { path: PathBuf },
    /// Replace satellite and street embeddings with their SAFE aggregation.
    Safe(SafeArgs),
    /// Plan the grouped hold-out and stratified folds.
    Split(SplitArgs),
    /// Train contrastive projection heads on embedding pairs.
    Pretrain(PretrainArgs),
    /// Run the ablation pipeline end to end.
    Run(RunArgs),
    /// Score a predictions file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Embedding widths as sat,street,pdfm.
    #[arg(long, default_value = "64,64,128")]
    pub dims: String,
    #[arg(long, default_value_t = 0.12)]
    pub extent: f64,
    #[arg(long, default_value_t = 0.02)]
    pub autocorrelation_length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub augment_copies: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SafeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub radius: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// degree or haversine
    #[arg(long, default_value = "degree")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Pair fixture file (`pair_id|image_emb|text_emb`).
    #[arg(long, conflicts_with = "synth_pairs")]
    pub pairs: Option<PathBuf>,
    /// Generate this many rotation-aligned pairs instead of reading a file.
    #[arg(long)]
    pub synth_pairs: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub synth_dim: usize,
    /// Output file for the trained head.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 16)]
    pub out_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub symmetric: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train with the [train] section only instead of the grid.
    #[arg(long)]
    pub no_grid: bool,
    /// inductive, transductive or per-partition
    #[arg(long)]
    pub safe_scope: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions file (`record_id|lat|lon|predicted|target`).
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub n_proj: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Outcome of a subcommand: either success text or validation diagnostics.
enum Outcome {
    Ok(String),
    Invalid(String),
}

fn parse_dims(s: &str) -> anyhow::Result<Dims> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .with_context(|| format!("dims {s:?}"))?;
    match v[..] {
        [a, b, c] => Ok(Dims::new(a, b, c)),
        _ => bail!("dims needs three comma-separated widths, got {s:?}"),
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(a: &SynthArgs) -> anyhow::Result<Outcome> {
    let cfg = SynthConfig {
        n_locations: a.n,
        dims: parse_dims(&a.dims)?,
        spatial_extent: a.extent,
        autocorrelation_length: a.autocorrelation_length,
        noise_std: a.noise_std,
        augment_copies: a.augment_copies,
        seed: a.seed,
        ..Default::default()
    };
    let ds = datamodel::synthesize_dataset(&cfg)?;
    datamodel::write_dataset(&ds, &a.out)?;
    let stamp = format!(
        "generator=walkclip-synth {}\nn_locations={}\ndims={}\nspatial_extent={}\nautocorrelation_length={}\nnoise_std={}\naugment_copies={}\nseed={}\norigin={},{}\nrecords={}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.n_locations,
        cfg.dims,
        cfg.spatial_extent,
        cfg.autocorrelation_length,
        cfg.noise_std,
        cfg.augment_copies,
        cfg.seed,
        cfg.origin.lat,
        cfg.origin.lon,
        ds.len()
    );
    let mut stamp_path = a.out.clone().into_os_string();
    stamp_path.push(".provenance");
    write_text(Path::new(&stamp_path), &stamp)?;
    Ok(Outcome::Ok(format!(
        "wrote {} records to {}",
        ds.len(),
        a.out.display()
    )))
}

fn cmd_validate(path: &Path) -> anyhow::Result<Outcome> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let out = datamodel::parse_dataset_text(&text);
    if out.errors.is_empty() {
        let d = out.dims.expect("valid file has dims");
        return Ok(Outcome::Ok(format!(
            "OK, {} records, dims=({}, {}, {})",
            out.records.len(),
            d.sat,
            d.street,
            d.pdfm
        )));
    }
    let lines: Vec<String> = out.errors.iter().map(|e| format!("error: {e}")).collect();
    Ok(Outcome::Invalid(lines.join("\n")))
}

fn cmd_safe(a: &SafeArgs) -> anyhow::Result<Outcome> {
    let cfg = SafeConfig {
        radius: a.radius,
        epsilon: a.epsilon,
        power: a.power,
        metric: a.metric.parse()?,
    };
    let ds = datamodel::parse_dataset(&a.input)?;
    let out = pipeline::safe_transform(&ds, &cfg)?;
    datamodel::write_dataset(&out, &a.out)?;
    Ok(Outcome::Ok(format!(
        "wrote {} records to {}",
        out.len(),
        a.out.display()
    )))
}

fn cmd_split(a: &SplitArgs) -> anyhow::Result<Outcome> {
    let ds = datamodel::parse_dataset(&a.dataset)?;
    let plan = SplitPlan::build(&ds, a.test_fraction, a.k, a.seed)?;
    plan.write(&a.out)?;
    let counts = plan.record_counts(&ds);
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(Outcome::Ok(format!(
        "records per partition: {}",
        summary.join(" ")
    )))
}

fn cmd_pretrain(a: &PretrainArgs) -> anyhow::Result<Outcome> {
    let pairs = match (&a.pairs, a.synth_pairs) {
        (Some(p), _) => contrastive::read_pairs(p)?.1,
        (None, Some(n)) => contrastive::synthesize_rotation_pairs(n, a.synth_dim, 0.05, a.seed)?,
        (None, None) => bail!("either --pairs or --synth-pairs is required"),
    };
    let cfg = ContrastiveTrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        seed: a.seed,
        symmetric: a.symmetric,
        out_dim: a.out_dim,
    };
    let out = contrastive::train_projection_head(&pairs, &cfg)?;
    write_text(&a.out, &contrastive::head_to_string(&out.head))?;
    let mut msg = format!("initial_loss={}\n", out.initial_loss);
    for (i, l) in out.epoch_losses.iter().enumerate() {
        msg.push_str(&format!("epoch{}_loss={l}\n", i + 1));
    }
    msg.push_str(&format!("tau={}", out.head.tau()));
    Ok(Outcome::Ok(msg))
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<Outcome> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &a.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(o) = &a.output_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if a.no_grid {
        cfg.use_grid = false;
    }
    if let Some(s) = &a.safe_scope {
        cfg.safe.scope = match s.as_str() {
            "inductive" => SafeScope::Inductive,
            "transductive" => SafeScope::Transductive,
            "per-partition" => SafeScope::PerPartition,
            other => bail!("unknown safe scope {other:?}"),
        };
    }
    if cfg.dataset.as_os_str().is_empty() {
        bail!("no dataset given (config `dataset` or --dataset)");
    }
    let report = pipeline::run_from_config(&cfg)?;
    let mut msg = String::new();
    for r in &report.rows {
        let r2 = r
            .test
            .r2
            .map_or("undefined".to_string(), |v| format!("{v:.4}"));
        msg.push_str(&format!(
            "{:<20} r2={r2} rmse={:.4} swd={:.4}\n",
            r.row.name, r.test.rmse, r.test.swd
        ));
    }
    msg.push_str(&format!("artifacts in {}", cfg.output_dir.display()));
    Ok(Outcome::Ok(msg))
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<Outcome> {
    let text = std::fs::read_to_string(&a.predictions)
        .with_context(|| format!("reading {}", a.predictions.display()))?;
    let preds: Vec<GeoPrediction> = pipeline::parse_predictions(&text)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let report = evaluate(
        &preds,
        SwdConfig {
            n_proj: a.n_proj,
            seed: a.seed,
        },
    )?;
    Ok(Outcome::Ok(report.to_kv().trim_end().to_string()))
}

/// Runs one parsed command, printing to stdout/stderr, and returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Validate { path } => cmd_validate(path),
        Command::Safe(a) => cmd_safe(a),
        Command::Split(a) => cmd_split(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(Outcome::Ok(msg)) => {
            println!("{msg}");
            EXIT_OK
        }
        Ok(Outcome::Invalid(msg)) => {
            eprintln!("{msg}");
            EXIT_INVALID
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

/// Parses `args` (including the program name) and executes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_RUNTIME
            } else {
                EXIT_OK
            }
        }
    }
}

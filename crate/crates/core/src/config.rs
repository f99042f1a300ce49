//! Run configuration as read from TOML.
//!
//! Every section has defaults, so an empty file is a valid configuration apart
//! from the dataset path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::SwdConfig;
use crate::regressor::{HyperGrid, Modality, TrainConfig};
use crate::safe::SafeConfig;
use crate::spatial::DistanceMetric;

/// Which points SAFE may aggregate over when transforming an evaluation partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafeScope {
    /// Fitting rows see only fitting points; evaluation rows see fitting plus
    /// evaluation points. Features only, no labels, cross the boundary.
    #[default]
    Inductive,
    /// Every row of the dataset is aggregated once over all points.
    Transductive,
    /// Each partition is aggregated over its own points only.
    PerPartition,
}

impl std::fmt::Display for SafeScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SafeScope::Inductive => "inductive",
            SafeScope::Transductive => "transductive",
            SafeScope::PerPartition => "per-partition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeSection {
    pub radius: f64,
    pub epsilon: f64,
    pub power: f64,
    pub metric: String,
    pub scope: SafeScope,
}

impl Default for SafeSection {
    fn default() -> Self {
        let d = SafeConfig::default();
        Self {
            radius: d.radius,
            epsilon: d.epsilon,
            power: d.power,
            metric: d.metric.to_string(),
            scope: SafeScope::default(),
        }
    }
}

impl SafeSection {
    pub fn to_config(&self) -> Result<SafeConfig> {
        let cfg = SafeConfig {
            radius: self.radius,
            epsilon: self.epsilon,
            power: self.power,
            metric: self.metric.parse::<DistanceMetric>()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            dropout_rate: d.dropout_rate,
            weight_decay: d.weight_decay,
            epochs: d.epochs,
            batch_size: d.batch_size,
            hidden_layers: d.hidden_layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub learning_rates: Vec<f64>,
    pub dropout_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = HyperGrid::default();
        Self {
            learning_rates: g.learning_rates,
            dropout_rates: g.dropout_rates,
            weight_decays: g.weight_decays,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    pub k: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            test_fraction: 0.15,
            k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwdSection {
    pub n_proj: usize,
}

impl Default for SwdSection {
    fn default() -> Self {
        Self {
            n_proj: SwdConfig::default().n_proj,
        }
    }
}

/// One ablation row: a modality combination with or without SAFE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationRow {
    pub name: String,
    #[serde(default)]
    pub use_sat: bool,
    #[serde(default)]
    pub use_street: bool,
    #[serde(default)]
    pub use_pdfm: bool,
    #[serde(default)]
    pub use_safe: bool,
}

impl AblationRow {
    pub fn new(name: &str, sat: bool, street: bool, pdfm: bool, safe: bool) -> Self {
        Self {
            name: name.into(),
            use_sat: sat,
            use_street: street,
            use_pdfm: pdfm,
            use_safe: safe,
        }
    }

    pub fn modalities(&self) -> Vec<Modality> {
        [
            (self.use_sat, Modality::Sat),
            (self.use_street, Modality::Street),
            (self.use_pdfm, Modality::Pdfm),
        ]
        .into_iter()
        .filter(|(on, _)| *on)
        .map(|(_, m)| m)
        .collect()
    }

    /// The six comparison rows: three single modalities, vision, vision plus
    /// population dynamics, and the latter with SAFE.
    pub fn standard_ladder() -> Vec<Self> {
        vec![
            Self::new("street", false, true, false, false),
            Self::new("sat", true, false, false, false),
            Self::new("pdfm", false, false, true, false),
            Self::new("vision", true, true, false, false),
            Self::new("vision+pdfm", true, true, true, false),
            Self::new("vision+pdfm+safe", true, true, true, true),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "+-_.".contains(c))
        {
            return Err(Error::config(format!(
                "ablation row name {:?} must be non-empty and use [A-Za-z0-9+-_.]",
                self.name
            )));
        }
        if self.modalities().is_empty() {
            return Err(Error::config(format!(
                "ablation row {:?} enables no modality",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// When false, `train` is used as a one-cell grid.
    pub use_grid: bool,
    pub safe: SafeSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub split: SplitSection,
    pub swd: SwdSection,
    pub ablation: Vec<AblationRow>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            output_dir: PathBuf::from("walkclip-out"),
            seed: 0,
            use_grid: true,
            safe: SafeSection::default(),
            train: TrainSection::default(),
            grid: GridSection::default(),
            split: SplitSection::default(),
            swd: SwdSection::default(),
            ablation: AblationRow::standard_ladder(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.safe.to_config()?;
        self.base_train_config().validate()?;
        if self.use_grid && self.hyper_grid().is_empty() {
            return Err(Error::config("grid has an empty axis"));
        }
        for cell in self.hyper_grid().cells(&self.base_train_config()) {
            cell.validate()?;
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::config("split.test_fraction must be in (0, 1)"));
        }
        if self.split.k < 2 {
            return Err(Error::config("split.k must be >= 2"));
        }
        if self.swd.n_proj == 0 {
            return Err(Error::config("swd.n_proj must be >= 1"));
        }
        if self.ablation.is_empty() {
            return Err(Error::config("at least one ablation row is required"));
        }
        let mut names = std::collections::HashSet::new();
        for row in &self.ablation {
            row.validate()?;
            if !names.insert(&row.name) {
                return Err(Error::config(format!(
                    "duplicate ablation row {:?}",
                    row.name
                )));
            }
        }
        Ok(())
    }

    pub fn base_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            dropout_rate: self.train.dropout_rate,
            weight_decay: self.train.weight_decay,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            hidden_layers: self.train.hidden_layers.clone(),
        }
    }

    pub fn hyper_grid(&self) -> HyperGrid {
        if self.use_grid {
            HyperGrid {
                learning_rates: self.grid.learning_rates.clone(),
                dropout_rates: self.grid.dropout_rates.clone(),
                weight_decays: self.grid.weight_decays.clone(),
            }
        } else {
            HyperGrid::single(&self.base_train_config())
        }
    }

    pub fn swd_config(&self) -> SwdConfig {
        SwdConfig {
            n_proj: self.swd.n_proj,
            seed: self.seed,
        }
    }
}

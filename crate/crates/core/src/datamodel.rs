//! Dataset schema, validation, the line-delimited file format and the seeded
//! synthetic-city generator.
//!
//! File layout: a metadata line `dims=<d_sat>,<d_street>,<d_pdfm>` followed by one
//! record per line,
//!
//! ```text
//! record_id|group_id|lat|lon|sat_emb|street_emb|pdfm_emb|walk_score
//! ```
//!
//! with embeddings written as comma-separated reals.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::textio::{join_reals, parse_real, parse_reals};

pub const DEFAULT_PDFM_DIM: usize = 128;
pub const DEFAULT_VISION_DIM: usize = 64;

/// Decimal-degree coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCoord {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let c = Self { lat, lon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(Error::config(format!("non-finite coordinate {self:?}")));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::config(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::config(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }
}

/// Embedding widths for the three modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub sat: usize,
    pub street: usize,
    pub pdfm: usize,
}

impl Dims {
    pub fn new(sat: usize, street: usize, pdfm: usize) -> Self {
        Self { sat, street, pdfm }
    }

    pub fn total(&self) -> usize {
        self.sat + self.street + self.pdfm
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::new(DEFAULT_VISION_DIM, DEFAULT_VISION_DIM, DEFAULT_PDFM_DIM)
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.sat, self.street, self.pdfm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationRecord {
    pub record_id: String,
    /// Location identity; augmented views of one place share it.
    pub group_id: String,
    pub coord: GeoCoord,
    pub sat_emb: Vec<f64>,
    pub street_emb: Vec<f64>,
    pub pdfm_emb: Vec<f64>,
    pub walk_score: f64,
}

fn check_id(kind: &str, id: &str) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err(format!("empty {kind}"));
    }
    if id.contains(['|', '\n', '\r']) || id.trim() != id {
        return Err(format!(
            "{kind} {id:?} contains a separator or surrounding whitespace"
        ));
    }
    Ok(())
}

impl LocationRecord {
    /// Checks everything that can be decided from the record alone.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        let rec_err = |msg: String| Error::Record {
            record_id: self.record_id.clone(),
            msg,
        };
        check_id("record_id", &self.record_id).map_err(rec_err)?;
        check_id("group_id", &self.group_id).map_err(rec_err)?;
        self.coord.validate().map_err(|e| rec_err(e.to_string()))?;
        if !(self.walk_score.is_finite() && (0.0..=100.0).contains(&self.walk_score)) {
            return Err(rec_err(format!(
                "walk_score {} outside [0, 100]",
                self.walk_score
            )));
        }
        for (name, v, want) in [
            ("sat_emb", &self.sat_emb, dims.sat),
            ("street_emb", &self.street_emb, dims.street),
            ("pdfm_emb", &self.pdfm_emb, dims.pdfm),
        ] {
            if v.len() != want {
                return Err(Error::dim(format!(
                    "record {}: {name} has {} values, dataset dims require {want}",
                    self.record_id,
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(rec_err(format!("{name} contains a non-finite value")));
            }
        }
        Ok(())
    }
}

/// Validated, ordered collection of records with consistent embedding widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LocationRecord>,
    dims: Dims,
}

impl Dataset {
    /// Validates and wraps `records`. Returns the first violation found.
    pub fn new(dims: Dims, records: Vec<LocationRecord>) -> Result<Self> {
        match diagnose(dims, &records).into_iter().next() {
            Some(e) => Err(e),
            None => Ok(Self { records, dims }),
        }
    }

    /// Infers dims from the first record. Fails on an empty list.
    pub fn from_records(records: Vec<LocationRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Degenerate("cannot infer dims from zero records".into()))?;
        let dims = Dims::new(
            first.sat_emb.len(),
            first.street_emb.len(),
            first.pdfm_emb.len(),
        );
        Self::new(dims, records)
    }

    pub fn empty(dims: Dims) -> Self {
        Self {
            records: Vec::new(),
            dims,
        }
    }

    pub fn records(&self) -> &[LocationRecord] {
        &self.records
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn coords(&self) -> Vec<GeoCoord> {
        self.records.iter().map(|r| r.coord).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.walk_score).collect()
    }

    /// Distinct group ids in first-appearance order.
    pub fn group_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.group_id.as_str()))
            .map(|r| r.group_id.as_str())
            .collect()
    }

    /// Records whose group is in `groups`, order preserved.
    pub fn subset_by_groups(&self, groups: &HashSet<String>) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| groups.contains(&r.group_id))
                .cloned()
                .collect(),
            dims: self.dims,
        }
    }

    /// Replaces the satellite and street embeddings. Rows follow record order.
    pub fn with_vision(&self, sat: &[Vec<f64>], street: &[Vec<f64>]) -> Result<Dataset> {
        if sat.len() != self.len() || street.len() != self.len() {
            return Err(Error::dim(
                "replacement embedding count differs from record count",
            ));
        }
        let records = self
            .records
            .iter()
            .zip(sat.iter().zip(street))
            .map(|(r, (s, t))| LocationRecord {
                sat_emb: s.clone(),
                street_emb: t.clone(),
                ..r.clone()
            })
            .collect();
        Dataset::new(self.dims, records)
    }
}

/// Every violation in `records`, in file order. Empty means valid.
pub fn diagnose(dims: Dims, records: &[LocationRecord]) -> Vec<Error> {
    let mut out = Vec::new();
    if dims.sat == 0 || dims.street == 0 || dims.pdfm == 0 {
        out.push(Error::dim(format!(
            "embedding dims must be positive, got ({dims})"
        )));
    }
    let mut ids = HashSet::new();
    let mut groups: HashMap<&str, (GeoCoord, f64, bool)> = HashMap::new();
    for r in records {
        if let Err(e) = r.validate(dims) {
            out.push(e);
        }
        if !ids.insert(r.record_id.as_str()) {
            out.push(Error::Record {
                record_id: r.record_id.clone(),
                msg: "duplicate record_id".into(),
            });
        }
        match groups.get_mut(r.group_id.as_str()) {
            None => {
                groups.insert(&r.group_id, (r.coord, r.walk_score, false));
            }
            Some((coord, score, reported)) => {
                if !*reported && (*coord != r.coord || *score != r.walk_score) {
                    *reported = true;
                    out.push(Error::Group {
                        group_id: r.group_id.clone(),
                        msg: format!(
                            "leakage risk: members disagree on coord/walk_score (record {})",
                            r.record_id
                        ),
                    });
                }
            }
        }
    }
    out
}

fn parse_dims(line: &str) -> Result<Dims> {
    let err = || Error::Parse {
        line: 1,
        msg: format!("expected metadata `dims=<sat>,<street>,<pdfm>`, got {line:?}"),
    };
    let rest = line.trim().strip_prefix("dims=").ok_or_else(err)?;
    let parts: Vec<usize> = rest
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err())?;
    match parts.as_slice() {
        [a, b, c] => Ok(Dims::new(*a, *b, *c)),
        _ => Err(err()),
    }
}

fn parse_record(line: &str, lineno: usize) -> Result<LocationRecord> {
    let f: Vec<&str> = line.split('|').collect();
    if f.len() != 8 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected 8 `|`-separated fields, found {}", f.len()),
        });
    }
    Ok(LocationRecord {
        record_id: f[0].to_string(),
        group_id: f[1].to_string(),
        coord: GeoCoord {
            lat: parse_real(f[2], lineno, "lat")?,
            lon: parse_real(f[3], lineno, "lon")?,
        },
        sat_emb: parse_reals(f[4], lineno, "sat_emb")?,
        street_emb: parse_reals(f[5], lineno, "street_emb")?,
        pdfm_emb: parse_reals(f[6], lineno, "pdfm_emb")?,
        walk_score: parse_real(f[7], lineno, "walk_score")?,
    })
}

/// Outcome of reading a dataset file without stopping at the first problem.
#[derive(Debug)]
pub struct ParseOutcome {
    pub dims: Option<Dims>,
    pub records: Vec<LocationRecord>,
    pub errors: Vec<Error>,
}

/// Parses dataset text, collecting every syntactic and semantic problem.
pub fn parse_dataset_text(text: &str) -> ParseOutcome {
    let mut lines = text.lines().enumerate();
    let mut errors = Vec::new();
    let dims = match lines.next() {
        Some((_, l)) => match parse_dims(l) {
            Ok(d) => Some(d),
            Err(e) => {
                errors.push(e);
                None
            }
        },
        None => {
            errors.push(Error::Parse {
                line: 1,
                msg: "missing metadata line".into(),
            });
            None
        }
    };
    let mut records = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        match parse_record(l, i + 1) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    if let Some(d) = dims {
        errors.extend(diagnose(d, &records));
    }
    ParseOutcome {
        dims,
        records,
        errors,
    }
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let out = parse_dataset_text(&text);
    if let Some(e) = out.errors.into_iter().next() {
        return Err(e);
    }
    // dims is always present when there are no errors
    let dims = out.dims.expect("metadata parsed");
    Ok(Dataset {
        records: out.records,
        dims,
    })
}

/// Canonical text form of a dataset.
pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut s = format!("dims={}\n", ds.dims);
    for r in &ds.records {
        let _ = writeln!(
            s,
            "{}|{}|{}|{}|{}|{}|{}|{}",
            r.record_id,
            r.group_id,
            r.coord.lat,
            r.coord.lon,
            join_reals(&r.sat_emb),
            join_reals(&r.street_emb),
            join_reals(&r.pdfm_emb),
            r.walk_score
        );
    }
    s
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset_to_string(ds)).map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic city.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_locations: usize,
    pub dims: Dims,
    /// Side of the square sampling window, degrees.
    pub spatial_extent: f64,
    /// Length scale of the radial bumps forming the latent field, degrees.
    pub autocorrelation_length: f64,
    /// Std of the per-location, per-modality noise on the latent readout.
    pub noise_std: f64,
    pub augment_copies: usize,
    pub seed: u64,
    /// South-west corner of the sampling window.
    pub origin: GeoCoord,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_locations: 2000,
            dims: Dims::default(),
            spatial_extent: 0.12,
            autocorrelation_length: 0.02,
            noise_std: 1.0,
            augment_copies: 0,
            seed: 0,
            origin: GeoCoord {
                lat: 44.90,
                lon: -93.30,
            },
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_locations == 0 {
            return Err(Error::config("n_locations must be positive"));
        }
        if self.dims.sat == 0 || self.dims.street == 0 || self.dims.pdfm == 0 {
            return Err(Error::config("embedding dims must be positive"));
        }
        if !(self.spatial_extent > 0.0 && self.spatial_extent.is_finite()) {
            return Err(Error::config("spatial_extent must be > 0"));
        }
        if !(self.autocorrelation_length > 0.0 && self.autocorrelation_length.is_finite()) {
            return Err(Error::config("autocorrelation_length must be > 0"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std must be >= 0"));
        }
        self.origin.validate()?;
        GeoCoord::new(
            self.origin.lat + self.spatial_extent,
            self.origin.lon + self.spatial_extent,
        )
        .map_err(|_| Error::config("sampling window leaves the valid coordinate range"))?;
        Ok(())
    }
}

// Score = clamp(SCORE_MEAN + SCORE_SCALE * z) for the standardized latent field z.
const SCORE_MEAN: f64 = 50.0;
const SCORE_SCALE: f64 = 15.0;
const NUISANCE_DIRECTIONS: usize = 3;
const ISOTROPIC_NOISE: f64 = 0.1;
// Extra jitter that distinguishes augmented views of the same location.
const VIEW_JITTER: f64 = 0.1;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// How one modality reads the latent field.
struct Readout {
    signal: Vec<f64>,
    nuisance: Vec<Vec<f64>>,
}

impl Readout {
    fn new(rng: &mut ChaCha8Rng, d: usize) -> Self {
        let k = NUISANCE_DIRECTIONS.min(d.saturating_sub(1));
        Self {
            signal: unit_vector(rng, d),
            nuisance: (0..k).map(|_| unit_vector(rng, d)).collect(),
        }
    }

    /// Latent-dependent part of the embedding for one location.
    fn base(&self, rng: &mut ChaCha8Rng, z: f64, noise_std: f64) -> Vec<f64> {
        let level = z + noise_std * normal(rng);
        let mut v: Vec<f64> = self.signal.iter().map(|s| s * level).collect();
        for dir in &self.nuisance {
            let a = normal(rng);
            for (x, d) in v.iter_mut().zip(dir) {
                *x += a * d;
            }
        }
        v
    }

    fn jitter(rng: &mut ChaCha8Rng, base: &[f64], std: f64) -> Vec<f64> {
        base.iter().map(|x| x + std * normal(rng)).collect()
    }
}

/// Seeded synthetic city.
///
/// Locations are uniform in a square. A latent field built from Gaussian radial
/// bumps of width `autocorrelation_length` is standardized over the sample and
/// mapped affinely to the score (clamped to [0, 100]). Each modality embeds the
/// field along one signal direction with independent per-location noise of std
/// `noise_std`, plus random nuisance directions and small isotropic noise.
/// Augmented copies share group, coordinate, score and latent readout, and differ
/// by a small view jitter.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ext = cfg.spatial_extent;
    let len = cfg.autocorrelation_length;

    // Bumps cover a margin around the window so the field has no edge fade.
    let span = ext + 4.0 * len;
    let n_bumps = (((span / len).powi(2)).ceil() as usize).clamp(4, 4096);
    let bumps: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let y = rng.random::<f64>() * span - 2.0 * len;
            let x = rng.random::<f64>() * span - 2.0 * len;
            (y, x, normal(&mut rng))
        })
        .collect();

    let offsets: Vec<(f64, f64)> = (0..cfg.n_locations)
        .map(|_| (rng.random::<f64>() * ext, rng.random::<f64>() * ext))
        .collect();
    let raw: Vec<f64> = offsets
        .iter()
        .map(|&(y, x)| {
            bumps
                .iter()
                .map(|&(by, bx, a)| {
                    let d2 = (y - by).powi(2) + (x - bx).powi(2);
                    a * (-d2 / (2.0 * len * len)).exp()
                })
                .sum()
        })
        .collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };

    let readouts = [
        Readout::new(&mut rng, cfg.dims.sat),
        Readout::new(&mut rng, cfg.dims.street),
        Readout::new(&mut rng, cfg.dims.pdfm),
    ];

    let mut records = Vec::with_capacity(cfg.n_locations * (1 + cfg.augment_copies));
    for (i, (&(y, x), &r)) in offsets.iter().zip(&raw).enumerate() {
        let z = (r - mean) / sd;
        let score = (SCORE_MEAN + SCORE_SCALE * z).clamp(0.0, 100.0);
        let coord = GeoCoord {
            lat: cfg.origin.lat + y,
            lon: cfg.origin.lon + x,
        };
        let bases: Vec<Vec<f64>> = readouts
            .iter()
            .map(|ro| ro.base(&mut rng, z, cfg.noise_std))
            .collect();
        let group_id = format!("g{i:06}");
        for copy in 0..=cfg.augment_copies {
            let mut embs = bases
                .iter()
                .map(|b| Readout::jitter(&mut rng, b, ISOTROPIC_NOISE));
            let (mut sat, mut street, mut pdfm) = (
                embs.next().unwrap(),
                embs.next().unwrap(),
                embs.next().unwrap(),
            );
            let record_id = if copy == 0 {
                format!("r{i:06}")
            } else {
                for v in [&mut sat, &mut street, &mut pdfm] {
                    *v = Readout::jitter(&mut rng, v, VIEW_JITTER);
                }
                format!("r{i:06}-a{copy}")
            };
            records.push(LocationRecord {
                record_id,
                group_id: group_id.clone(),
                coord,
                sat_emb: sat,
                street_emb: street,
                pdfm_emb: pdfm,
                walk_score: score,
            });
        }
    }
    Dataset::new(cfg.dims, records)
}

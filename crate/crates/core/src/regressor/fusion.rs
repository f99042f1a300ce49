//! Concatenation fusion in the fixed order satellite, street, population-dynamics.

use crate::datamodel::{Dataset, Dims, LocationRecord};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Sat,
    Street,
    Pdfm,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Sat, Modality::Street, Modality::Pdfm];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Sat => "sat",
            Modality::Street => "street",
            Modality::Pdfm => "pdfm",
        }
    }

    fn width(self, dims: Dims) -> usize {
        match self {
            Modality::Sat => dims.sat,
            Modality::Street => dims.street,
            Modality::Pdfm => dims.pdfm,
        }
    }

    fn of(self, r: &LocationRecord) -> &[f64] {
        match self {
            Modality::Sat => &r.sat_emb,
            Modality::Street => &r.street_emb,
            Modality::Pdfm => &r.pdfm_emb,
        }
    }
}

pub fn fuse(sat: &[f64], street: &[f64], pdfm: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(sat.len() + street.len() + pdfm.len());
    h.extend_from_slice(sat);
    h.extend_from_slice(street);
    h.extend_from_slice(pdfm);
    h
}

/// Which modalities are concatenated, and where each one lands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionLayout {
    dims: Dims,
    enabled: Vec<Modality>,
}

impl FusionLayout {
    /// Modalities are always laid out in canonical order regardless of input order.
    pub fn new(dims: Dims, modalities: &[Modality]) -> Result<Self> {
        let mut enabled: Vec<Modality> = modalities.to_vec();
        enabled.sort();
        enabled.dedup();
        if enabled.is_empty() {
            return Err(Error::config("at least one modality must be enabled"));
        }
        Ok(Self { dims, enabled })
    }

    pub fn full(dims: Dims) -> Self {
        Self {
            dims,
            enabled: Modality::ALL.to_vec(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.enabled
    }

    pub fn width(&self) -> usize {
        self.enabled.iter().map(|m| m.width(self.dims)).sum()
    }

    /// Column range of `m` inside a fused vector, if enabled.
    pub fn range(&self, m: Modality) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for &e in &self.enabled {
            let w = e.width(self.dims);
            if e == m {
                return Some(start..start + w);
            }
            start += w;
        }
        None
    }

    pub fn slice<'a>(&self, fused: &'a [f64], m: Modality) -> Option<&'a [f64]> {
        self.range(m).map(|r| &fused[r])
    }

    pub fn fuse_record(&self, r: &LocationRecord) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.width());
        for &m in &self.enabled {
            h.extend_from_slice(m.of(r));
        }
        h
    }

    /// Design matrix with one fused row per record.
    pub fn design_matrix(&self, ds: &Dataset) -> Result<Matrix> {
        if ds.dims() != self.dims {
            return Err(Error::dim(format!(
                "layout dims ({}) differ from dataset dims ({})",
                self.dims,
                ds.dims()
            )));
        }
        let w = self.width();
        let mut data = Vec::with_capacity(ds.len() * w);
        for r in ds.records() {
            for &m in &self.enabled {
                data.extend_from_slice(m.of(r));
            }
        }
        Matrix::from_vec(ds.len(), w, data)
    }

    pub fn label(&self) -> String {
        self.enabled
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join("+")
    }
}

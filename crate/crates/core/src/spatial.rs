//! Coordinate distance and a uniform-grid radius index.

use std::collections::HashMap;

use crate::datamodel::GeoCoord;
use crate::error::{Error, Result};

/// How distances between coordinates are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// Euclidean distance on raw (lat, lon) degrees.
    #[default]
    Degree,
    /// Great-circle central angle, expressed in degrees of arc.
    Haversine,
}

impl DistanceMetric {
    pub fn distance(self, a: GeoCoord, b: GeoCoord) -> f64 {
        match self {
            DistanceMetric::Degree => degree_distance(a, b),
            DistanceMetric::Haversine => haversine_degrees(a, b),
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" => Ok(Self::Degree),
            "haversine" => Ok(Self::Haversine),
            other => Err(Error::config(format!("unknown distance metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMetric::Degree => "degree",
            DistanceMetric::Haversine => "haversine",
        })
    }
}

/// Straight-line distance in (lat, lon) degree space. No latitude correction.
pub fn degree_distance(a: GeoCoord, b: GeoCoord) -> f64 {
    (a.lat - b.lat).hypot(a.lon - b.lon)
}

pub fn haversine_degrees(a: GeoCoord, b: GeoCoord) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    (2.0 * h.sqrt().min(1.0).asin()).to_degrees()
}

type CellKey = (i64, i64);

/// Immutable bucket grid over a coordinate snapshot.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    metric: DistanceMetric,
    buckets: HashMap<CellKey, Vec<usize>>,
    coords: Vec<GeoCoord>,
}

impl SpatialIndex {
    pub fn build(coords: &[GeoCoord], cell_size: f64) -> Result<Self> {
        Self::build_with_metric(coords, cell_size, DistanceMetric::Degree)
    }

    pub fn build_with_metric(
        coords: &[GeoCoord],
        cell_size: f64,
        metric: DistanceMetric,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::config(format!(
                "cell_size must be > 0, got {cell_size}"
            )));
        }
        let mut buckets: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            if !c.lat.is_finite() || !c.lon.is_finite() {
                return Err(Error::config(format!("coordinate {i} is not finite")));
            }
            buckets.entry(cell_of(*c, cell_size)).or_default().push(i);
        }
        Ok(Self {
            cell_size,
            metric,
            buckets,
            coords: coords.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn coords(&self) -> &[GeoCoord] {
        &self.coords
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Indices in the bucket containing `c`.
    pub fn bucket(&self, c: GeoCoord) -> &[usize] {
        self.buckets
            .get(&cell_of(c, self.cell_size))
            .map_or(&[], Vec::as_slice)
    }

    /// Indices `j != i` strictly closer than `radius` to point `i`, ascending.
    pub fn radius_query(&self, i: usize, radius: f64) -> Result<Vec<usize>> {
        Ok(self
            .radius_query_with_distance(i, radius)?
            .into_iter()
            .map(|(j, _)| j)
            .collect())
    }

    /// As [`radius_query`](Self::radius_query), paired with each distance.
    pub fn radius_query_with_distance(&self, i: usize, radius: f64) -> Result<Vec<(usize, f64)>> {
        let c = *self.coords.get(i).ok_or_else(|| {
            Error::dim(format!(
                "query index {i} outside an index of {} points",
                self.coords.len()
            ))
        })?;
        self.query_point(c, radius, Some(i))
    }

    /// Points strictly within `radius` of an arbitrary coordinate, ascending by index.
    pub fn query_point(
        &self,
        c: GeoCoord,
        radius: f64,
        exclude: Option<usize>,
    ) -> Result<Vec<(usize, f64)>> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config(format!("radius must be > 0, got {radius}")));
        }
        let (lat_reach, lon_reach) = match self.metric {
            DistanceMetric::Degree => (radius, radius),
            DistanceMetric::Haversine => {
                // A degree of longitude spans cos(lat) degrees of arc.
                let lat_max = (c.lat.abs() + radius).min(90.0);
                let cos = lat_max.to_radians().cos();
                let lon = if cos > 1e-9 { radius / cos } else { 360.0 };
                (radius, lon.min(360.0))
            }
        };
        let cs = self.cell_size;
        let (r0, r1) = (
            ((c.lat - lat_reach) / cs).floor() as i64,
            ((c.lat + lat_reach) / cs).floor() as i64,
        );
        let (c0, c1) = (
            ((c.lon - lon_reach) / cs).floor() as i64,
            ((c.lon + lon_reach) / cs).floor() as i64,
        );
        let mut out = Vec::new();
        let cells = (r1 - r0 + 1).saturating_mul(c1 - c0 + 1);
        if cells as usize > self.buckets.len() {
            // Sparse grid: walking the occupied buckets is cheaper.
            for (&(r, col), idx) in &self.buckets {
                if (r0..=r1).contains(&r) && (c0..=c1).contains(&col) {
                    self.collect(c, radius, exclude, idx, &mut out);
                }
            }
        } else {
            for r in r0..=r1 {
                for col in c0..=c1 {
                    if let Some(idx) = self.buckets.get(&(r, col)) {
                        self.collect(c, radius, exclude, idx, &mut out);
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(j, _)| j);
        Ok(out)
    }

    fn collect(
        &self,
        c: GeoCoord,
        radius: f64,
        exclude: Option<usize>,
        idx: &[usize],
        out: &mut Vec<(usize, f64)>,
    ) {
        for &j in idx {
            if Some(j) == exclude {
                continue;
            }
            let d = self.metric.distance(c, self.coords[j]);
            if d < radius {
                out.push((j, d));
            }
        }
    }
}

fn cell_of(c: GeoCoord, cell_size: f64) -> CellKey {
    (
        (c.lat / cell_size).floor() as i64,
        (c.lon / cell_size).floor() as i64,
    )
}

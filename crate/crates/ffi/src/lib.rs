//! C ABI over the `walkclip` library.
//!
//! Conventions:
//! - Every fallible function returns [`WcStatus`]; outputs go through pointer
//!   arguments, and nothing is written to them on failure.
//! - Datasets and spatial indexes are opaque handles released with their `_free`
//!   function. Strings returned by the library are released with `wc_string_free`.
//! - Matrices are row-major `double` buffers; coordinates are passed as parallel
//!   latitude/longitude arrays.
//! - Handles may be shared read-only between threads; error messages are per thread.

mod error;

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use walkclip::contrastive::{self, EmbeddingPairBatch, ProjectionHead};
use walkclip::datamodel::{self, Dataset, Dims, GeoCoord, SynthConfig};
use walkclip::evaluation;
use walkclip::linalg::Matrix;
use walkclip::pipeline;
use walkclip::safe::{self, SafeConfig};
use walkclip::spatial::{self, SpatialIndex};
use walkclip::splits::SplitPlan;

use error::{fail, guard, Fail};
pub use error::{wc_last_error_message, WcStatus};

/// Opaque dataset handle.
pub struct WcDataset {
    inner: Dataset,
}

/// Opaque uniform-grid radius index.
pub struct WcSpatialIndex {
    inner: SpatialIndex,
}

/// SAFE parameters. `metric` is 0 for degree-space Euclidean, 1 for haversine.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WcSafeConfig {
    pub radius: f64,
    pub epsilon: f64,
    pub power: f64,
    pub metric: u32,
}

/// Synthetic-city parameters; origin is fixed to the library default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WcSynthConfig {
    pub n_locations: usize,
    pub d_sat: usize,
    pub d_street: usize,
    pub d_pdfm: usize,
    pub spatial_extent: f64,
    pub autocorrelation_length: f64,
    pub noise_std: f64,
    pub augment_copies: usize,
    pub seed: u64,
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return fail(WcStatus::NullPointer, format!("{what} is NULL"));
    }
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(WcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn coords(lats: *const f64, lons: *const f64, n: usize) -> Result<Vec<GeoCoord>, Fail> {
    let lat = slice(lats, n, "lats")?;
    let lon = slice(lons, n, "lons")?;
    Ok(lat
        .iter()
        .zip(lon)
        .map(|(&lat, &lon)| GeoCoord { lat, lon })
        .collect())
}

fn safe_config(c: &WcSafeConfig) -> Result<SafeConfig, Fail> {
    let metric = match c.metric {
        0 => spatial::DistanceMetric::Degree,
        1 => spatial::DistanceMetric::Haversine,
        m => return fail(WcStatus::InvalidArgument, format!("unknown metric {m}")),
    };
    let cfg = SafeConfig {
        radius: c.radius,
        epsilon: c.epsilon,
        power: c.power,
        metric,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(WcStatus::InvalidArgument, "output contains a NUL byte"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- datasets ----

/// Parses and validates a dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_load(
    path: *const c_char,
    out: *mut *mut WcDataset,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = PathBuf::from(c_str(path, "path")?);
        let ds = datamodel::parse_dataset(path)?;
        *out = Box::into_raw(Box::new(WcDataset { inner: ds }));
        Ok(())
    })
}

/// Generates a seeded synthetic dataset.
///
/// # Safety
/// `cfg` must point to a valid config; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_synthesize(
    cfg: *const WcSynthConfig,
    out: *mut *mut WcDataset,
) -> WcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let c = &*cfg;
        let ds = datamodel::synthesize_dataset(&SynthConfig {
            n_locations: c.n_locations,
            dims: Dims::new(c.d_sat, c.d_street, c.d_pdfm),
            spatial_extent: c.spatial_extent,
            autocorrelation_length: c.autocorrelation_length,
            noise_std: c.noise_std,
            augment_copies: c.augment_copies,
            seed: c.seed,
            ..Default::default()
        })?;
        *out = Box::into_raw(Box::new(WcDataset { inner: ds }));
        Ok(())
    })
}

/// Writes a dataset in canonical form.
///
/// # Safety
/// `ds` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_write(ds: *const WcDataset, path: *const c_char) -> WcStatus {
    guard(|| {
        non_null(ds, "ds")?;
        let path = PathBuf::from(c_str(path, "path")?);
        datamodel::write_dataset(&(*ds).inner, path)?;
        Ok(())
    })
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_len(ds: *const WcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Embedding widths as `[sat, street, pdfm]`.
///
/// # Safety
/// `ds` must be a live handle and `out` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_dims(ds: *const WcDataset, out: *mut usize) -> WcStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out, "out")?;
        let d = (*ds).inner.dims();
        let o = std::slice::from_raw_parts_mut(out, 3);
        o.copy_from_slice(&[d.sat, d.street, d.pdfm]);
        Ok(())
    })
}

/// SAFE-transformed copy of a dataset (satellite and street embeddings only).
///
/// # Safety
/// `ds` and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_safe_transform(
    ds: *const WcDataset,
    cfg: *const WcSafeConfig,
    out: *mut *mut WcDataset,
) -> WcStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let t = pipeline::safe_transform(&(*ds).inner, &safe_config(&*cfg)?)?;
        *out = Box::into_raw(Box::new(WcDataset { inner: t }));
        Ok(())
    })
}

/// Split plan (hold-out plus stratified folds) in its text serialization.
/// Release `*out_text` with `wc_string_free`.
///
/// # Safety
/// `ds` must be a live handle; `out_text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_split_plan(
    ds: *const WcDataset,
    test_fraction: f64,
    k: usize,
    seed: u64,
    out_text: *mut *mut c_char,
) -> WcStatus {
    guard(|| {
        non_null(ds, "ds")?;
        non_null(out_text, "out_text")?;
        let plan = SplitPlan::build(&(*ds).inner, test_fraction, k, seed)?;
        *out_text = into_c_string(plan.to_text())?;
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_dataset_free(ds: *mut WcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---- spatial ----

/// Euclidean distance in degree space.
#[no_mangle]
pub extern "C" fn wc_degree_distance(lat_a: f64, lon_a: f64, lat_b: f64, lon_b: f64) -> f64 {
    spatial::degree_distance(
        GeoCoord {
            lat: lat_a,
            lon: lon_a,
        },
        GeoCoord {
            lat: lat_b,
            lon: lon_b,
        },
    )
}

/// Builds a degree-space radius index over `n` points.
///
/// # Safety
/// `lats`/`lons` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_index_build(
    lats: *const f64,
    lons: *const f64,
    n: usize,
    cell_size: f64,
    out: *mut *mut WcSpatialIndex,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        let idx = SpatialIndex::build(&coords(lats, lons, n)?, cell_size)?;
        *out = Box::into_raw(Box::new(WcSpatialIndex { inner: idx }));
        Ok(())
    })
}

/// Neighbors of point `i` strictly within `radius`, ascending.
///
/// Always stores the neighbor count in `*out_len`. Returns
/// `WC_STATUS_BUFFER_TOO_SMALL` (and writes nothing to `out`) when it exceeds `cap`.
///
/// # Safety
/// `idx` must be a live handle; `out` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn wc_index_radius_query(
    idx: *const WcSpatialIndex,
    i: usize,
    radius: f64,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> WcStatus {
    guard(|| {
        non_null(idx, "idx")?;
        non_null(out_len, "out_len")?;
        let nb = (*idx).inner.radius_query(i, radius)?;
        *out_len = nb.len();
        if nb.len() > cap {
            return fail(
                WcStatus::BufferTooSmall,
                format!("{} neighbors, buffer holds {cap}", nb.len()),
            );
        }
        if !nb.is_empty() {
            non_null(out, "out")?;
            std::slice::from_raw_parts_mut(out, nb.len()).copy_from_slice(&nb);
        }
        Ok(())
    })
}

/// # Safety
/// `idx` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_index_free(idx: *mut WcSpatialIndex) {
    if !idx.is_null() {
        drop(Box::from_raw(idx));
    }
}

// ---- SAFE ----

/// Inverse-distance weight `1 / (distance^power + epsilon)`.
#[no_mangle]
pub extern "C" fn wc_idw_weight(distance: f64, epsilon: f64, power: f64) -> f64 {
    safe::idw_weight(
        distance,
        &SafeConfig {
            epsilon,
            power,
            ..Default::default()
        },
    )
}

/// SAFE aggregation of an `n x d` row-major feature matrix into `out` (`n x d`).
///
/// # Safety
/// `features` and `out` must hold `n*d` values; `lats`/`lons` must hold `n`.
#[no_mangle]
pub unsafe extern "C" fn wc_safe_aggregate(
    features: *const f64,
    n: usize,
    d: usize,
    lats: *const f64,
    lons: *const f64,
    cfg: *const WcSafeConfig,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let cfg = safe_config(&*cfg)?;
        let f = Matrix::from_vec(n, d, slice(features, n * d, "features")?.to_vec())?;
        let idx = cfg.build_index(&coords(lats, lons, n)?)?;
        let res = safe::safe_aggregate(&f, &idx, &cfg)?;
        if n * d > 0 {
            non_null(out, "out")?;
            std::slice::from_raw_parts_mut(out, n * d).copy_from_slice(res.as_slice());
        }
        Ok(())
    })
}

// ---- contrastive ----

/// Cosine similarity of two length-`n` vectors.
///
/// # Safety
/// `u`, `v` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_cosine_similarity(
    u: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = contrastive::cosine_similarity(slice(u, n, "u")?, slice(v, n, "v")?)?;
        Ok(())
    })
}

/// InfoNCE loss of `n` pairs (`image`: n x p, `text`: n x q) under projections
/// `image_proj` (p x k) and `text_proj` (q x k) with temperature `exp(log_tau)`.
///
/// # Safety
/// All buffers must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_info_nce_loss(
    image: *const f64,
    text: *const f64,
    n: usize,
    p: usize,
    q: usize,
    image_proj: *const f64,
    text_proj: *const f64,
    k: usize,
    log_tau: f64,
    symmetric: bool,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        let batch = EmbeddingPairBatch::new(
            Matrix::from_vec(n, p, slice(image, n * p, "image")?.to_vec())?,
            Matrix::from_vec(n, q, slice(text, n * q, "text")?.to_vec())?,
        )?;
        let head = ProjectionHead {
            image_proj: Matrix::from_vec(p, k, slice(image_proj, p * k, "image_proj")?.to_vec())?,
            text_proj: Matrix::from_vec(q, k, slice(text_proj, q * k, "text_proj")?.to_vec())?,
            log_tau,
        };
        *out = contrastive::info_nce_loss(&head, &batch, symmetric)?;
        Ok(())
    })
}

// ---- evaluation ----

/// # Safety
/// `preds`/`targets` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_r_squared(
    preds: *const f64,
    targets: *const f64,
    n: usize,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = evaluation::r_squared(slice(preds, n, "preds")?, slice(targets, n, "targets")?)?;
        Ok(())
    })
}

/// # Safety
/// `preds`/`targets` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_rmse(
    preds: *const f64,
    targets: *const f64,
    n: usize,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = evaluation::rmse(slice(preds, n, "preds")?, slice(targets, n, "targets")?)?;
        Ok(())
    })
}

/// Order-1 transport cost between two equal-size samples.
///
/// # Safety
/// `a`/`b` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_wasserstein_1d(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = evaluation::wasserstein_1d(slice(a, n, "a")?, slice(b, n, "b")?)?;
        Ok(())
    })
}

/// Sliced Wasserstein distance between two clouds of `n` 3-D points (row-major
/// `n x 3`).
///
/// # Safety
/// `a`/`b` must hold `3*n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_sliced_wasserstein(
    a: *const f64,
    b: *const f64,
    n: usize,
    n_proj: usize,
    seed: u64,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        non_null(out, "out")?;
        let to_pts = |s: &[f64]| -> Vec<[f64; 3]> {
            s.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
        };
        let a = to_pts(slice(a, 3 * n, "a")?);
        let b = to_pts(slice(b, 3 * n, "b")?);
        *out = evaluation::sliced_wasserstein(&a, &b, n_proj, seed)?;
        Ok(())
    })
}

// ---- pipeline ----

/// Runs the ablation pipeline from a TOML configuration string, writing artifacts
/// to the configured output directory. `*out_report` receives the deterministic
/// report text; release it with `wc_string_free`.
///
/// # Safety
/// `config_toml` must be NUL-terminated; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_run(
    config_toml: *const c_char,
    out_report: *mut *mut c_char,
) -> WcStatus {
    guard(|| {
        non_null(out_report, "out_report")?;
        let cfg = walkclip::config::RunConfig::from_toml(c_str(config_toml, "config_toml")?)?;
        let report = pipeline::run_from_config(&cfg)?;
        *out_report = into_c_string(report.deterministic_text())?;
        Ok(())
    })
}

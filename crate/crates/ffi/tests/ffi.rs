use std::ffi::{CStr, CString};
use std::ptr;

use walkclip_ffi::*;

fn last_error() -> String {
    let p = wc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth_cfg(n: usize, seed: u64) -> WcSynthConfig {
    WcSynthConfig {
        n_locations: n,
        d_sat: 4,
        d_street: 4,
        d_pdfm: 4,
        spatial_extent: 0.12,
        autocorrelation_length: 0.02,
        noise_std: 1.0,
        augment_copies: 0,
        seed,
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(wc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.txt").to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            wc_dataset_synthesize(&synth_cfg(50, 3), &mut ds),
            WcStatus::Ok
        );
        assert_eq!(wc_dataset_len(ds), 50);
        let mut dims = [0usize; 3];
        assert_eq!(wc_dataset_dims(ds, dims.as_mut_ptr()), WcStatus::Ok);
        assert_eq!(dims, [4, 4, 4]);
        assert_eq!(wc_dataset_write(ds, path.as_ptr()), WcStatus::Ok);

        let mut back = ptr::null_mut();
        assert_eq!(wc_dataset_load(path.as_ptr(), &mut back), WcStatus::Ok);
        assert_eq!(wc_dataset_len(back), 50);

        let cfg = WcSafeConfig {
            radius: 0.01,
            epsilon: 1e-4,
            power: 1.0,
            metric: 0,
        };
        let mut t = ptr::null_mut();
        assert_eq!(wc_dataset_safe_transform(back, &cfg, &mut t), WcStatus::Ok);
        assert_eq!(wc_dataset_len(t), 50);

        let mut text = ptr::null_mut();
        assert_eq!(
            wc_dataset_split_plan(back, 0.15, 5, 0, &mut text),
            WcStatus::Ok
        );
        let s = CStr::from_ptr(text).to_str().unwrap().to_owned();
        assert!(s.contains("test"));
        wc_string_free(text);

        wc_dataset_free(t);
        wc_dataset_free(back);
        wc_dataset_free(ds);
        wc_dataset_free(ptr::null_mut());
    }
}

#[test]
fn load_missing_file_is_io_error() {
    let path = CString::new("/nonexistent/walkclip.txt").unwrap();
    let mut ds = ptr::null_mut();
    let st = unsafe { wc_dataset_load(path.as_ptr(), &mut ds) };
    assert_eq!(st, WcStatus::Io);
    assert!(ds.is_null());
    assert!(last_error().contains("walkclip.txt"));
}

#[test]
fn load_invalid_record_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    std::fs::write(&p, "dims=1,1,1\nr1|g1|44.9|-93.3|0.1|0.2|0.3|105\n").unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    let st = unsafe { wc_dataset_load(path.as_ptr(), &mut ds) };
    assert_eq!(st, WcStatus::Parse);
    assert!(last_error().contains("r1"));
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        assert_eq!(
            wc_dataset_load(ptr::null(), ptr::null_mut()),
            WcStatus::NullPointer
        );
        assert_eq!(
            wc_dataset_dims(ptr::null(), ptr::null_mut()),
            WcStatus::NullPointer
        );
        assert_eq!(wc_dataset_len(ptr::null()), 0);
        let mut out = 0.0;
        assert_eq!(
            wc_rmse(ptr::null(), ptr::null(), 3, &mut out),
            WcStatus::NullPointer
        );
    }
}

#[test]
fn radius_query_reports_needed_length() {
    let lats = [0.0, 0.0, 0.0, 1.0];
    let lons = [0.0, 0.005, 0.008, 1.0];
    unsafe {
        let mut idx = ptr::null_mut();
        assert_eq!(
            wc_index_build(lats.as_ptr(), lons.as_ptr(), 4, 0.01, &mut idx),
            WcStatus::Ok
        );
        let mut buf = [0usize; 1];
        let mut len = 0usize;
        let st = wc_index_radius_query(idx, 0, 0.01, buf.as_mut_ptr(), 1, &mut len);
        assert_eq!(st, WcStatus::BufferTooSmall);
        assert_eq!(len, 2);
        let mut buf = [0usize; 4];
        let st = wc_index_radius_query(idx, 0, 0.01, buf.as_mut_ptr(), 4, &mut len);
        assert_eq!(st, WcStatus::Ok);
        assert_eq!(&buf[..len], &[1, 2]);
        let st = wc_index_radius_query(idx, 3, 0.01, ptr::null_mut(), 0, &mut len);
        assert_eq!(st, WcStatus::Ok);
        assert_eq!(len, 0);
        let st = wc_index_radius_query(idx, 9, 0.01, buf.as_mut_ptr(), 4, &mut len);
        assert_eq!(st, WcStatus::Dimension);
        wc_index_free(idx);
    }
}

#[test]
fn scalar_functions() {
    assert!((wc_idw_weight(0.0, 1e-4, 1.0) - 10000.0).abs() < 1e-9);
    assert!((wc_degree_distance(0.0, 0.0, 0.01, 0.01) - 0.0141421356).abs() < 1e-9);
    let mut out = 0.0;
    unsafe {
        let u = [1.0, 0.0];
        let v = [0.0, 2.0];
        assert_eq!(
            wc_cosine_similarity(u.as_ptr(), v.as_ptr(), 2, &mut out),
            WcStatus::Ok
        );
        assert!(out.abs() < 1e-12);
        let z = [0.0, 0.0];
        assert_eq!(
            wc_cosine_similarity(u.as_ptr(), z.as_ptr(), 2, &mut out),
            WcStatus::ZeroNorm
        );

        let p = [1.0, 2.0, 3.0];
        let t = [1.0, 2.0, 4.0];
        assert_eq!(wc_rmse(p.as_ptr(), t.as_ptr(), 3, &mut out), WcStatus::Ok);
        assert!((out - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(
            wc_r_squared(p.as_ptr(), p.as_ptr(), 3, &mut out),
            WcStatus::Ok
        );
        assert!((out - 1.0).abs() < 1e-12);
        let c = [5.0, 5.0, 5.0];
        assert_eq!(
            wc_r_squared(p.as_ptr(), c.as_ptr(), 3, &mut out),
            WcStatus::Degenerate
        );
        assert_eq!(
            wc_wasserstein_1d(p.as_ptr(), t.as_ptr(), 3, &mut out),
            WcStatus::Ok
        );
        assert!((out - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            wc_wasserstein_1d(p.as_ptr(), t.as_ptr(), 0, &mut out),
            WcStatus::Degenerate
        );
    }
}

#[test]
fn sliced_wasserstein_identity_and_shift() {
    let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
    let mut same = 1.0;
    let mut shifted = 0.0;
    unsafe {
        assert_eq!(
            wc_sliced_wasserstein(a.as_ptr(), a.as_ptr(), 10, 64, 0, &mut same),
            WcStatus::Ok
        );
        assert_eq!(
            wc_sliced_wasserstein(a.as_ptr(), b.as_ptr(), 10, 64, 0, &mut shifted),
            WcStatus::Ok
        );
    }
    assert_eq!(same, 0.0);
    assert!(shifted > 0.0);
}

#[test]
fn safe_aggregate_matches_hand_value() {
    let f = [1.0, 2.0, 3.0];
    let lats = [0.0, 0.0, 1.0];
    let lons = [0.0, 0.005, 1.0];
    let cfg = WcSafeConfig {
        radius: 0.01,
        epsilon: 1e-4,
        power: 1.0,
        metric: 0,
    };
    let mut out = [0.0; 3];
    let st = unsafe {
        wc_safe_aggregate(
            f.as_ptr(),
            3,
            1,
            lats.as_ptr(),
            lons.as_ptr(),
            &cfg,
            out.as_mut_ptr(),
        )
    };
    assert_eq!(st, WcStatus::Ok);
    let w = 1.0 / (0.005 + 1e-4);
    assert!((out[0] - (1e4 * 1.0 + w * 2.0) / (1e4 + w)).abs() < 1e-12);
    assert!((out[1] - (1e4 * 2.0 + w * 1.0) / (1e4 + w)).abs() < 1e-12);
    assert_eq!(out[2], 3.0);
    let bad = WcSafeConfig { metric: 7, ..cfg };
    let st = unsafe {
        wc_safe_aggregate(
            f.as_ptr(),
            3,
            1,
            lats.as_ptr(),
            lons.as_ptr(),
            &bad,
            out.as_mut_ptr(),
        )
    };
    assert_eq!(st, WcStatus::InvalidArgument);
}

#[test]
fn info_nce_single_pair_is_zero_and_uniform_is_ln_n() {
    let mut out = f64::NAN;
    let img = [1.0, 0.0];
    let eye = [1.0, 0.0, 0.0, 1.0];
    unsafe {
        let st = wc_info_nce_loss(
            img.as_ptr(),
            img.as_ptr(),
            1,
            2,
            2,
            eye.as_ptr(),
            eye.as_ptr(),
            2,
            0.07f64.ln(),
            false,
            &mut out,
        );
        assert_eq!(st, WcStatus::Ok);
    }
    assert!(out.abs() < 1e-12);
    let x = [1.0, 1.0, 1.0, 1.0];
    unsafe {
        let st = wc_info_nce_loss(
            x.as_ptr(),
            x.as_ptr(),
            2,
            2,
            2,
            eye.as_ptr(),
            eye.as_ptr(),
            2,
            0.0,
            true,
            &mut out,
        );
        assert_eq!(st, WcStatus::Ok);
    }
    assert!((out - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn errors_are_per_thread() {
    let path = CString::new("/nonexistent/x").unwrap();
    let mut ds = ptr::null_mut();
    unsafe { wc_dataset_load(path.as_ptr(), &mut ds) };
    assert!(!wc_last_error_message().is_null());
    std::thread::spawn(|| assert!(wc_last_error_message().is_null()))
        .join()
        .unwrap();
    let mut out = 0.0;
    let a = [1.0];
    unsafe { wc_wasserstein_1d(a.as_ptr(), a.as_ptr(), 1, &mut out) };
    assert!(wc_last_error_message().is_null());
}

#[test]
fn header_is_checked_in_and_declares_all_symbols() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/walkclip.h"))
            .unwrap();
    for sym in [
        "wc_version",
        "wc_string_free",
        "wc_last_error_message",
        "wc_dataset_load",
        "wc_dataset_synthesize",
        "wc_dataset_write",
        "wc_dataset_len",
        "wc_dataset_dims",
        "wc_dataset_safe_transform",
        "wc_dataset_split_plan",
        "wc_dataset_free",
        "wc_degree_distance",
        "wc_index_build",
        "wc_index_radius_query",
        "wc_index_free",
        "wc_idw_weight",
        "wc_safe_aggregate",
        "wc_cosine_similarity",
        "wc_info_nce_loss",
        "wc_r_squared",
        "wc_rmse",
        "wc_wasserstein_1d",
        "wc_sliced_wasserstein",
        "wc_run",
    ] {
        assert!(header.contains(&format!("{sym}(")), "missing {sym}");
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use tutorship_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ts_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn encode_worked_examples() {
    let tutors = [7i64, 9, 7, 9, 7, 9];
    let mut out = [0i32; 6];
    assert_eq!(unsafe { ts_encode(tutors.as_ptr(), 6, out.as_mut_ptr()) }, TsStatus::Ok);
    assert_eq!(out, [-1, -1, 2, 2, 2, 2]);

    let tutors = [1i64, 1, 1, 2, 2, 2];
    assert_eq!(unsafe { ts_encode(tutors.as_ptr(), 6, out.as_mut_ptr()) }, TsStatus::Ok);
    assert_eq!(out, [-1, 1, 1, -1, 1, 1]);

    assert_eq!(unsafe { ts_encode(ptr::null(), 0, ptr::null_mut()) }, TsStatus::Ok);
    assert_eq!(unsafe { ts_encode(tutors.as_ptr(), 6, ptr::null_mut()) }, TsStatus::NullPointer);
}

#[test]
fn distributedness_of_aabb() {
    let mut d = 0.0;
    let tutors = [1i64, 1, 2, 2];
    assert_eq!(unsafe { ts_distributedness(tutors.as_ptr(), 4, 2.0, &mut d) }, TsStatus::Ok);
    assert!((d - 0.383659).abs() < 1e-6, "{d}");
    assert_eq!(unsafe { ts_distributedness(tutors.as_ptr(), 4, 1.0, &mut d) }, TsStatus::InvalidArgument);
    assert!(last_error().contains("log_base"));
}

#[test]
fn dtw_window_too_small() {
    let x = [-1.0, 1.0, 1.0, 1.0];
    let y = [-1.0];
    let mut d = 0.0;
    assert_eq!(unsafe { ts_dtw_distance(x.as_ptr(), 4, y.as_ptr(), 1, 0, false, &mut d) }, TsStatus::Ok);
    assert_eq!(d, 6.0);
    assert_eq!(unsafe { ts_dtw_distance(x.as_ptr(), 4, y.as_ptr(), 1, 1, false, &mut d) }, TsStatus::InvalidArgument);
    assert!(!last_error().is_empty());
}

#[test]
fn cluster_two_groups() {
    let seqs: [&[i32]; 6] = [
        &[-1, -1, -1, -1],
        &[-1, -1, -1],
        &[-1, -1, -1, -1, -1],
        &[-1, 1, 1, 1],
        &[-1, 1, 1, 1, 1],
        &[-1, -1, 1, 1],
    ];
    let ptrs: Vec<*const i32> = seqs.iter().map(|s| s.as_ptr()).collect();
    let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
    let mut m = ptr::null_mut();
    let st = unsafe { ts_distance_matrix_from_sequences(ptrs.as_ptr(), lens.as_ptr(), 6, 0, false, &mut m) };
    assert_eq!(st, TsStatus::Ok);

    let mut n = 0;
    assert_eq!(unsafe { ts_distance_matrix_len(m, &mut n) }, TsStatus::Ok);
    assert_eq!(n, 6);
    let mut d = -1.0;
    assert_eq!(unsafe { ts_distance_matrix_get(m, 0, 1, &mut d) }, TsStatus::Ok);
    assert_eq!(d, 0.0);
    assert_eq!(unsafe { ts_distance_matrix_get(m, 0, 6, &mut d) }, TsStatus::InvalidArgument);

    let mut c = ptr::null_mut();
    assert_eq!(unsafe { ts_k_medoids(m, 2, 100, &mut c) }, TsStatus::Ok);
    let mut labels = [9usize; 6];
    assert_eq!(unsafe { ts_clustering_labels(c, labels.as_mut_ptr(), 6) }, TsStatus::Ok);
    assert_eq!(labels, [0, 0, 0, 1, 1, 1]);
    let mut medoids = [0usize; 2];
    assert_eq!(unsafe { ts_clustering_medoids(c, medoids.as_mut_ptr(), 2) }, TsStatus::Ok);
    assert!(medoids[0] < 3 && medoids[1] >= 3);
    assert_eq!(unsafe { ts_clustering_labels(c, labels.as_mut_ptr(), 5) }, TsStatus::InvalidArgument);

    let mut s = 0.0;
    assert_eq!(unsafe { ts_silhouette(m, c, &mut s) }, TsStatus::Ok);
    assert!(s > 0.5 && s <= 1.0, "{s}");

    let mut cost = -1.0;
    assert_eq!(unsafe { ts_clustering_total_cost(c, &mut cost) }, TsStatus::Ok);
    assert!(cost >= 0.0);

    unsafe {
        ts_clustering_free(c);
        ts_distance_matrix_free(m);
        ts_clustering_free(ptr::null_mut());
    }
}

#[test]
fn dense_matrix_is_validated() {
    let asym = [0.0, 1.0, 2.0, 0.0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ts_distance_matrix_from_dense(asym.as_ptr(), 2, &mut m) }, TsStatus::InvalidArgument);
    assert!(m.is_null());
    let sym = [0.0, 1.0, 1.0, 0.0];
    assert_eq!(unsafe { ts_distance_matrix_from_dense(sym.as_ptr(), 2, &mut m) }, TsStatus::Ok);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { ts_k_medoids(m, 3, 10, &mut c) }, TsStatus::InvalidArgument);
    unsafe { ts_distance_matrix_free(m) };
}

#[test]
fn statistics() {
    let (mut rho, mut p) = (0.0, 0.0);
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 2.0, 4.0];
    assert_eq!(unsafe { ts_spearman(x.as_ptr(), y.as_ptr(), 4, &mut rho, &mut p) }, TsStatus::Ok);
    assert!((rho - 0.8).abs() < 1e-12);
    assert!(p > 0.0 && p < 1.0);
    assert_eq!(unsafe { ts_spearman(x.as_ptr(), y.as_ptr(), 3, &mut rho, &mut p) }, TsStatus::Ok);
    assert!(p.is_nan());

    let values = [1.0, 2.0, 3.0, 2.0, 3.0, 4.0];
    let sizes = [3usize, 3];
    let (mut f, mut fp) = (0.0, 0.0);
    assert_eq!(unsafe { ts_anova(values.as_ptr(), sizes.as_ptr(), 2, &mut f, &mut fp) }, TsStatus::Ok);
    assert!((f - 1.5).abs() < 1e-12);
    assert!((fp - 0.287864).abs() < 1e-6, "{fp}");

    let flat = [1.0, 1.0, 2.0, 2.0];
    let sizes = [2usize, 2];
    assert_eq!(unsafe { ts_anova(flat.as_ptr(), sizes.as_ptr(), 2, &mut f, &mut fp) }, TsStatus::Undefined);
}

#[test]
fn dataset_and_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    std::fs::write(
        &csv,
        "learner_id,session_index,tutor_id,fluency,grammar,vocabulary,pronunciation\n\
         a,1,t1,1,1,1,1\na,2,t2,2,2,2,2\na,3,t1,3,3,3,3\n\
         b,1,t3,1,1,1,1\nb,2,t3,1.5,1,1,1\nb,3,t3,2,1,1,1\n\
         c,1,t4,2,2,2,2\nc,2,t5,2,2,2,2\n",
    )
    .unwrap();
    let path = CString::new(csv.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { ts_dataset_load_csv(path.as_ptr(), &mut ds) }, TsStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { ts_dataset_len(ds, &mut n) }, TsStatus::Ok);
    assert_eq!(n, 3);

    let mut json = ptr::null_mut();
    let config = CString::new(r#"{"rng_seed": 3, "tukey_draws": 1000}"#).unwrap();
    assert_eq!(unsafe { ts_analyze(ds, config.as_ptr(), &mut json) }, TsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { ts_string_free(json) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["provenance"]["seed"], 3);
    assert_eq!(report["provenance"]["n_learners"], 3);

    let bad = CString::new(r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(unsafe { ts_analyze(ds, bad.as_ptr(), &mut json) }, TsStatus::InvalidArgument);
    assert!(last_error().contains("no_such_field"));
    unsafe { ts_dataset_free(ds) };

    let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ts_dataset_load_csv(missing.as_ptr(), &mut ds) }, TsStatus::Io);
    assert!(last_error().contains("none.csv"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ts_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

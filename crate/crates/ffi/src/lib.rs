//! C ABI over the `tutorship` library.
//!
//! Every function returns a [`TsStatus`]; results come back through out
//! pointers. On failure, [`ts_last_error`] describes what went wrong on the
//! calling thread. Objects are opaque handles released with their `_free`
//! function; strings returned by the library are released with
//! [`ts_string_free`]. Panics never cross the boundary; they surface as
//! `TS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use tutorship::clustering::{k_medoids, silhouette, ClusterAssignment};
use tutorship::distance::{dtw_distance, DistanceMatrix, DtwOptions};
use tutorship::encoding::{encode_symbols, EncodedSequence, NEW_TUTOR};
use tutorship::io::read_sessions_file;
use tutorship::metrics::distributedness_symbols;
use tutorship::model::ingest;
use tutorship::pipeline::{analyze, report_json, PipelineOptions};
use tutorship::stats::{one_way_anova, spearman};
use tutorship::{AnalysisConfig, Error, LearnerRecord};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or configuration.
    InvalidArgument = 2,
    /// Malformed input data (rows, encodings).
    InvalidData = 3,
    /// The quantity is undefined for this input (e.g. zero variance).
    Undefined = 4,
    Io = 5,
    Panic = 6,
}

/// Pairwise DTW distances between learners.
pub struct TsDistanceMatrix(DistanceMatrix);

/// Result of a k-medoids run.
pub struct TsClustering(ClusterAssignment);

/// Learner records loaded from a session CSV.
pub struct TsDataset(Vec<LearnerRecord>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(TsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidRow { .. } | Error::DuplicateSession { .. } | Error::MalformedEncoding { .. } | Error::Csv(_) => {
                TsStatus::InvalidData
            }
            Error::Undefined(_) => TsStatus::Undefined,
            Error::Io { .. } => TsStatus::Io,
            _ => TsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(TsStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            TsStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for writes.
unsafe fn output<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` must be null or a pointer obtained from `Box::into_raw`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn dtw_options(window: i64, length_normalize: bool) -> DtwOptions {
    DtwOptions {
        window: usize::try_from(window).ok().filter(|&w| w > 0),
        length_normalize,
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Offset-encodes a tutor sequence given as integer tutor labels.
/// `out` must hold `len` values: -1 for a new tutor, otherwise the distance
/// back to the same tutor's previous session.
///
/// # Safety
/// `tutors` must point to `len` values and `out` to `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn ts_encode(tutors: *const i64, len: usize, out: *mut i32) -> TsStatus {
    guard(|| {
        let tutors = input(tutors, len, "tutors")?;
        let enc = encode_symbols(tutors, NEW_TUTOR);
        if len > 0 && out.is_null() {
            return Err(null("out"));
        }
        if len > 0 {
            slice::from_raw_parts_mut(out, len).copy_from_slice(&enc);
        }
        Ok(())
    })
}

/// Distributedness of a tutor sequence in the given log base (2 for bits).
///
/// # Safety
/// `tutors` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_distributedness(tutors: *const i64, len: usize, log_base: f64, out: *mut f64) -> TsStatus {
    guard(|| {
        if !(log_base > 0.0 && log_base != 1.0) {
            return Err(invalid(format!("log_base must be positive and not 1, got {log_base}")));
        }
        let tutors = input(tutors, len, "tutors")?;
        let mut ids: Vec<i64> = Vec::new();
        let symbols: Vec<usize> = tutors
            .iter()
            .map(|t| match ids.iter().position(|x| x == t) {
                Some(i) => i,
                None => {
                    ids.push(*t);
                    ids.len() - 1
                }
            })
            .collect();
        output(out, distributedness_symbols(&symbols, log_base), "out")
    })
}

/// DTW distance between two numeric sequences. `window <= 0` disables the
/// Sakoe–Chiba band.
///
/// # Safety
/// `x` must point to `m` values, `y` to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_dtw_distance(
    x: *const f64,
    m: usize,
    y: *const f64,
    n: usize,
    window: i64,
    length_normalize: bool,
    out: *mut f64,
) -> TsStatus {
    guard(|| {
        let x = input(x, m, "x")?;
        let y = input(y, n, "y")?;
        output(out, dtw_distance(x, y, dtw_options(window, length_normalize))?, "out")
    })
}

/// Wraps a dense row-major `n × n` matrix, which must be symmetric with a zero
/// diagonal and finite non-negative entries.
///
/// # Safety
/// `data` must point to `n * n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_distance_matrix_from_dense(
    data: *const f64,
    n: usize,
    out: *mut *mut TsDistanceMatrix,
) -> TsStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| invalid("matrix size overflows"))?;
        let data = input(data, len, "data")?.to_vec();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let d = DistanceMatrix::from_dense(ids, data)?;
        output(out, Box::into_raw(Box::new(TsDistanceMatrix(d))), "out")
    })
}

/// Pairwise DTW distances between `count` encoded sequences; sequence `i`
/// starts at `seqs[i]` and has `lens[i]` values.
///
/// # Safety
/// `seqs` and `lens` must point to `count` entries, each `seqs[i]` to
/// `lens[i]` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_distance_matrix_from_sequences(
    seqs: *const *const i32,
    lens: *const usize,
    count: usize,
    window: i64,
    length_normalize: bool,
    out: *mut *mut TsDistanceMatrix,
) -> TsStatus {
    guard(|| {
        let seqs = input(seqs, count, "seqs")?;
        let lens = input(lens, count, "lens")?;
        let encs = seqs
            .iter()
            .zip(lens)
            .enumerate()
            .map(|(i, (&p, &len))| {
                Ok(EncodedSequence {
                    learner_id: i.to_string(),
                    values: input(p, len, "sequence")?.to_vec(),
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let d = tutorship::distance::pairwise_distance_matrix(&encs, dtw_options(window, length_normalize))?;
        output(out, Box::into_raw(Box::new(TsDistanceMatrix(d))), "out")
    })
}

/// # Safety
/// `m` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_distance_matrix_len(m: *const TsDistanceMatrix, out: *mut usize) -> TsStatus {
    guard(|| output(out, handle(m, "matrix")?.0.len(), "out"))
}

/// # Safety
/// `m` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_distance_matrix_get(m: *const TsDistanceMatrix, i: usize, j: usize, out: *mut f64) -> TsStatus {
    guard(|| {
        let d = &handle(m, "matrix")?.0;
        if i >= d.len() || j >= d.len() {
            return Err(invalid(format!("index ({i}, {j}) out of range for {} items", d.len())));
        }
        output(out, d.get(i, j), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_distance_matrix_free(m: *mut TsDistanceMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// PAM k-medoids over a distance matrix.
///
/// # Safety
/// `m` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_k_medoids(
    m: *const TsDistanceMatrix,
    k: usize,
    max_iter: usize,
    out: *mut *mut TsClustering,
) -> TsStatus {
    guard(|| {
        let a = k_medoids(&handle(m, "matrix")?.0, k, 0, max_iter)?;
        output(out, Box::into_raw(Box::new(TsClustering(a))), "out")
    })
}

/// # Safety
/// `c` must be a live clustering handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_clustering_k(c: *const TsClustering, out: *mut usize) -> TsStatus {
    guard(|| output(out, handle(c, "clustering")?.0.k, "out"))
}

/// # Safety
/// `c` must be a live clustering handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_clustering_total_cost(c: *const TsClustering, out: *mut f64) -> TsStatus {
    guard(|| output(out, handle(c, "clustering")?.0.total_cost, "out"))
}

/// Cluster number (0..k, ordered by medoid index) for each of the `len` items.
///
/// # Safety
/// `c` must be a live clustering handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ts_clustering_labels(c: *const TsClustering, out: *mut usize, len: usize) -> TsStatus {
    guard(|| {
        let ids = handle(c, "clustering")?.0.cluster_ids();
        copy_out(&ids, out, len)
    })
}

/// Item index of each of the `k` medoids, ascending.
///
/// # Safety
/// `c` must be a live clustering handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ts_clustering_medoids(c: *const TsClustering, out: *mut usize, len: usize) -> TsStatus {
    guard(|| copy_out(&handle(c, "clustering")?.0.medoid_indices, out, len))
}

unsafe fn copy_out(values: &[usize], out: *mut usize, len: usize) -> Result<(), Failure> {
    if len != values.len() {
        return Err(invalid(format!("buffer holds {len} values, need {}", values.len())));
    }
    if len > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(values);
    }
    Ok(())
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_clustering_free(c: *mut TsClustering) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Mean silhouette width of a clustering over the matrix it was built from.
///
/// # Safety
/// `m` and `c` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_silhouette(m: *const TsDistanceMatrix, c: *const TsClustering, out: *mut f64) -> TsStatus {
    guard(|| {
        let d = &handle(m, "matrix")?.0;
        let a = &handle(c, "clustering")?.0;
        if a.labels.len() != d.len() {
            return Err(invalid("clustering does not match matrix"));
        }
        output(out, silhouette(d, a)?.mean, "out")
    })
}

/// Spearman rank correlation. `p_out` receives NaN when the sample is too
/// small for a p-value.
///
/// # Safety
/// `x` and `y` must point to `n` values; `rho_out` and `p_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_spearman(x: *const f64, y: *const f64, n: usize, rho_out: *mut f64, p_out: *mut f64) -> TsStatus {
    guard(|| {
        let r = spearman(input(x, n, "x")?, input(y, n, "y")?)?;
        output(rho_out, r.rho, "rho_out")?;
        output(p_out, r.p_value.unwrap_or(f64::NAN), "p_out")
    })
}

/// One-way ANOVA. `values` holds the groups back to back; group `g` has
/// `group_sizes[g]` values.
///
/// # Safety
/// `group_sizes` must point to `n_groups` values and `values` to their sum;
/// `f_out` and `p_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_anova(
    values: *const f64,
    group_sizes: *const usize,
    n_groups: usize,
    f_out: *mut f64,
    p_out: *mut f64,
) -> TsStatus {
    guard(|| {
        let sizes = input(group_sizes, n_groups, "group_sizes")?;
        let total = sizes.iter().try_fold(0usize, |a, &s| a.checked_add(s)).ok_or_else(|| invalid("group sizes overflow"))?;
        let mut rest = input(values, total, "values")?;
        let groups: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&s| {
                let (g, tail) = rest.split_at(s);
                rest = tail;
                g.to_vec()
            })
            .collect();
        let a = one_way_anova(&groups)?;
        output(f_out, a.f_stat, "f_out")?;
        output(p_out, a.p_value, "p_out")
    })
}

/// Loads a session CSV (`learner_id,session_index,tutor_id,<skills>`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_dataset_load_csv(path: *const c_char, out: *mut *mut TsDataset) -> TsStatus {
    guard(|| {
        let path = string(path, "path")?;
        let records = ingest(read_sessions_file(Path::new(path), None)?)?;
        output(out, Box::into_raw(Box::new(TsDataset(records))), "out")
    })
}

/// Number of learners in the dataset.
///
/// # Safety
/// `d` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_dataset_len(d: *const TsDataset, out: *mut usize) -> TsStatus {
    guard(|| output(out, handle(d, "dataset")?.0.len(), "out"))
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_dataset_free(d: *mut TsDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Runs the full analysis and returns the report as JSON in `*out`, to be
/// released with [`ts_string_free`]. `config_json` may be null for defaults.
///
/// # Safety
/// `d` must be a live dataset handle, `config_json` null or a NUL-terminated
/// string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_analyze(d: *const TsDataset, config_json: *const c_char, out: *mut *mut c_char) -> TsStatus {
    guard(|| {
        let records = &handle(d, "dataset")?.0;
        let config: AnalysisConfig = if config_json.is_null() {
            AnalysisConfig::default()
        } else {
            serde_json::from_str(string(config_json, "config_json")?).map_err(|e| invalid(format!("config: {e}")))?
        };
        let report = analyze(records, &config, &PipelineOptions::default())?;
        let json = CString::new(report_json(&report)?).map_err(|_| invalid("report contains NUL"))?;
        output(out, json.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn errors_are_reported_per_call() {
        let mut out = 0.0;
        let st = unsafe { ts_dtw_distance(ptr::null(), 2, [1.0].as_ptr(), 1, 0, false, &mut out) };
        assert_eq!(st, TsStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(ts_last_error()) }.to_str().unwrap();
        assert!(msg.contains('x'), "{msg}");

        let st = unsafe { ts_dtw_distance([0.0].as_ptr(), 1, [3.0].as_ptr(), 1, 0, false, &mut out) };
        assert_eq!(st, TsStatus::Ok);
        assert_eq!(out, 3.0);
        assert!(unsafe { CStr::from_ptr(ts_last_error()) }.to_bytes().is_empty());
    }

    #[test]
    fn panics_become_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, TsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ts_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }

    #[test]
    fn window_zero_means_none() {
        assert_eq!(dtw_options(0, false).window, None);
        assert_eq!(dtw_options(-3, false).window, None);
        assert_eq!(dtw_options(2, true).window, Some(2));
    }
}

//! C ABI over `coordetect`.
//!
//! Objects are opaque handles created by `cd_*` constructors and released
//! with the matching `*_free`. Every fallible call returns a [`CdStatus`];
//! on failure [`cd_last_error`] describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coordetect::afriat::test_rationalizable;
use coordetect::detector::{
    generate_clean, phi_star, run_detector, DetectorReport, Hypothesis, Regime, DEFAULT_TOL,
    NOISE_STREAM,
};
use coordetect::forward::{add_noise, GenerationConfig};
use coordetect::model::{read_dataset, write_dataset};
use coordetect::rng::substream;
use coordetect::{Error, NoiseModel, Probe, ProbeResponseDataset, Response};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Unsupported = 4,
    Domain = 5,
    Numerical = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque probe/response dataset.
pub struct CdDataset(ProbeResponseDataset);

/// Opaque detector report.
pub struct CdReport(DetectorReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CdStatus {
    match e {
        Error::InvalidArgument(_) => CdStatus::InvalidArgument,
        Error::Dimension(_) => CdStatus::Dimension,
        Error::Unsupported(_) => CdStatus::Unsupported,
        Error::Domain(_) => CdStatus::Domain,
        Error::Numerical(_) | Error::NotConverged { .. } => CdStatus::Numerical,
        Error::Parse { .. } | Error::Json(_) => CdStatus::Parse,
        Error::Io(_) => CdStatus::Io,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (CdStatus, String)>) -> CdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CdStatus::Panic
        }
    }
}

fn lib<T>(r: coordetect::Result<T>) -> Result<T, (CdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CdStatus, String) {
    (CdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, (CdStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CdStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CdStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (CdStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next `cd_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Reads a dataset CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_read(
    path: *const c_char,
    out: *mut *mut CdDataset,
) -> CdStatus {
    guard(|| {
        let p = path_arg(path)?;
        let ds = lib(read_dataset(p))?;
        store(out, CdDataset(ds))
    })
}

/// Writes a dataset CSV file.
///
/// # Safety
/// `ds` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_write(ds: *const CdDataset, path: *const c_char) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let p = path_arg(path)?;
        lib(write_dataset(&ds.0, p))
    })
}

/// Builds a dataset from row-major arrays: `probes[t*n + c]` and
/// `responses[(t*m + i)*n + c]`.
///
/// # Safety
/// `probes` must hold `t*n` values, `responses` `t*m*n` values.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_new(
    t: usize,
    m: usize,
    n: usize,
    probes: *const f64,
    responses: *const f64,
    noisy: c_int,
    out: *mut *mut CdDataset,
) -> CdStatus {
    guard(|| {
        if probes.is_null() || responses.is_null() {
            return Err(null("data array"));
        }
        let tn = t
            .checked_mul(n)
            .ok_or((CdStatus::InvalidArgument, "size overflow".into()))?;
        let tmn = tn
            .checked_mul(m)
            .ok_or((CdStatus::InvalidArgument, "size overflow".into()))?;
        let p = std::slice::from_raw_parts(probes, tn);
        let r = std::slice::from_raw_parts(responses, tmn);
        let probes = p.chunks(n.max(1)).map(|c| Probe(c.to_vec())).collect();
        let responses = r
            .chunks((m * n).max(1))
            .map(|row| row.chunks(n.max(1)).map(|c| Response(c.to_vec())).collect())
            .collect();
        let ds = lib(ProbeResponseDataset::new(probes, responses, noisy != 0))?;
        store(out, CdDataset(ds))
    })
}

/// Coordinated data from the reference generator (`regime = 0`) or
/// non-coordinated data (`regime = 1`) with `T = t`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cd_generate(
    regime: c_int,
    t: usize,
    seed: u64,
    out: *mut *mut CdDataset,
) -> CdStatus {
    guard(|| {
        let regime = match regime {
            0 => Regime::Coordinated,
            1 => Regime::Noncoordinated,
            r => return Err((CdStatus::InvalidArgument, format!("unknown regime {r}"))),
        };
        let gen = GenerationConfig {
            t_len: t,
            ..GenerationConfig::reference(seed)
        };
        let ds = lib(generate_clean(regime, &gen, seed))?;
        store(out, CdDataset(ds))
    })
}

/// Returns a noisy copy with i.i.d. Gaussian noise of standard deviation `sigma`.
///
/// # Safety
/// `ds` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_add_noise(
    ds: *const CdDataset,
    sigma: f64,
    seed: u64,
    out: *mut *mut CdDataset,
) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let noise = lib(NoiseModel::gaussian(sigma))?;
        let noisy = lib(add_noise(&ds.0, &noise, &mut substream(seed, NOISE_STREAM)))?;
        store(out, CdDataset(noisy))
    })
}

/// Dimensions `T`, `M`, `n`. Any output pointer may be null.
///
/// # Safety
/// `ds` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_shape(
    ds: *const CdDataset,
    t: *mut usize,
    m: *mut usize,
    n: *mut usize,
) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        for (p, v) in [(t, ds.0.t_len()), (m, ds.0.m_len()), (n, ds.0.n_dim())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cd_dataset_free(ds: *mut CdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Sets `*consistent` to 1 when every agent passes the Afriat test.
///
/// # Safety
/// `ds` must come from this library and `consistent` be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_test_rationalizable(
    ds: *const CdDataset,
    consistent: *mut c_int,
) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        if consistent.is_null() {
            return Err(null("output pointer"));
        }
        let v = lib(test_rationalizable(&ds.0))?;
        *consistent = c_int::from(v.consistent);
        Ok(())
    })
}

/// Worst-agent minimal perturbation `Φ*`.
///
/// # Safety
/// `ds` must come from this library and `value` be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_phi_star(ds: *const CdDataset, value: *mut f64) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        if value.is_null() {
            return Err(null("output pointer"));
        }
        *value = lib(phi_star(&ds.0, DEFAULT_TOL))?.phi_star;
        Ok(())
    })
}

/// Runs the detector with `l` Monte-Carlo samples of the noise bound under
/// Gaussian noise of standard deviation `sigma_assumed`.
///
/// # Safety
/// `ds` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cd_detect(
    ds: *const CdDataset,
    sigma_assumed: f64,
    gamma: f64,
    l: usize,
    seed: u64,
    out: *mut *mut CdReport,
) -> CdStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let noise = lib(NoiseModel::gaussian(sigma_assumed))?;
        let report = lib(run_detector(&ds.0, &noise, gamma, l, seed, DEFAULT_TOL))?;
        store(out, CdReport(report))
    })
}

/// Test statistic `1 − F̂(Φ*)`, or NaN for a null handle.
///
/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cd_report_statistic(r: *const CdReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.statistic)
}

/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cd_report_phi_star(r: *const CdReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.phi_star)
}

/// 0 for H0 (coordinated), 1 for H1, -1 for a null handle.
///
/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cd_report_hypothesis(r: *const CdReport) -> c_int {
    match r.as_ref().map(|r| r.0.hypothesis) {
        Some(Hypothesis::H0) => 0,
        Some(Hypothesis::H1) => 1,
        None => -1,
    }
}

/// Report as JSON. Release the string with [`cd_string_free`].
///
/// # Safety
/// `r` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cd_report_json(r: *const CdReport, out: *mut *mut c_char) -> CdStatus {
    guard(|| {
        let r = deref(r, "report")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = lib(serde_json::to_string(&r.0).map_err(Error::from))?;
        *out = CString::new(text)
            .map_err(|e| (CdStatus::Parse, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`cd_report_json`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn cd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `r` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cd_report_free(r: *mut CdReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

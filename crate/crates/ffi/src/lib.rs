//! C ABI for `hicrit`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`HicritStatus`] and writes its result through an out-pointer; the text of
//! the most recent error on the calling thread is available from
//! [`hicrit_last_error`]. Panics never unwind into C: they are reported as
//! `HICRIT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hicrit::bounds::{lower_bound, BoundKind};
use hicrit::exact::crossing_probability;
use hicrit::power::{analytic_power, mc_power, CountMode, MixtureModel, Sided};
use hicrit::scan::{scan, Interval, ScanConfig, ScanDataset, ScanResult};
use hicrit::{boundary_vector, evaluate, tail_pvalue, threshold, CurveKind, Error, PValueSample, RejectionRule, StatisticSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HicritStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the mathematical domain.
    Domain = 2,
    /// Malformed input data.
    Input = 3,
    /// Problem too large for the requested method.
    Size = 4,
    /// Root finding or integration failed.
    Numeric = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HicritKind {
    Hc = 0,
    Mhc = 1,
    Bj = 2,
    Mbj = 3,
    Jw = 4,
}

impl From<HicritKind> for CurveKind {
    fn from(k: HicritKind) -> Self {
        match k {
            HicritKind::Hc => CurveKind::Hc,
            HicritKind::Mhc => CurveKind::Mhc,
            HicritKind::Bj => CurveKind::Bj,
            HicritKind::Mbj => CurveKind::Mbj,
            HicritKind::Jw => CurveKind::Jw,
        }
    }
}

/// Sorted p-value sample.
pub struct HicritSample(PValueSample);

/// Boundary-crossing rejection rule for a fixed `(kind, n, b, k0, k1)`.
pub struct HicritRule(RejectionRule);

/// `N x T` matrix of sequences for the interval scan.
pub struct HicritDataset(ScanDataset);

/// Detections of one scan.
pub struct HicritScanResult(ScanResult);

/// One detected interval; `start` is 0-based.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HicritDetection {
    pub start: usize,
    pub len: usize,
    pub value: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> HicritStatus {
    match e {
        Error::Domain(_) => HicritStatus::Domain,
        Error::Input(_) => HicritStatus::Input,
        Error::Size { .. } => HicritStatus::Size,
        Error::Numeric(_) => HicritStatus::Numeric,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F>(f: F) -> HicritStatus
where
    F: FnOnce() -> Result<(), HicritStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HicritStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HicritStatus::Panic
        }
    }
}

fn fail(e: Error) -> HicritStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> HicritStatus {
    set_error(&format!("null pointer: {what}"));
    HicritStatus::NullPointer
}

/// Borrows a C array; a null pointer is allowed only for `len == 0`.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], HicritStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, HicritStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, HicritStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hicrit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hicrit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` p-values into a new sample.
///
/// # Safety
/// `p` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_sample_new(p: *const f64, n: usize, out_sample: *mut *mut HicritSample) -> HicritStatus {
    guard(|| {
        let values = slice(p, n, "p")?.to_vec();
        let dst = out(out_sample, "out_sample")?;
        let sample = PValueSample::new(values).map_err(fail)?;
        *dst = Box::into_raw(Box::new(HicritSample(sample)));
        Ok(())
    })
}

/// # Safety
/// `sample` must come from [`hicrit_sample_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hicrit_sample_free(sample: *mut HicritSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of p-values, 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hicrit_sample_len(sample: *const HicritSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.n())
}

/// Statistic value over `k0..=k1`. `argmax` receives the 1-based maximizing
/// index, or 0 when no term is admissible.
///
/// # Safety
/// `sample` must be a live handle; out-pointers must be writable
/// (`argmax` may be null).
#[no_mangle]
pub unsafe extern "C" fn hicrit_evaluate(
    sample: *const HicritSample,
    kind: HicritKind,
    k0: usize,
    k1: usize,
    value: *mut f64,
    argmax: *mut usize,
) -> HicritStatus {
    guard(|| {
        let s = handle(sample, "sample")?;
        let v = out(value, "value")?;
        let res = evaluate(&StatisticSpec::new(kind.into(), k0, k1), &s.0).map_err(fail)?;
        *v = res.value;
        if let Some(a) = argmax.as_mut() {
            *a = res.argmax_k.unwrap_or(0);
        }
        Ok(())
    })
}

/// Analytic null tail probability `P{T >= b}`.
///
/// # Safety
/// `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_tail_pvalue(kind: HicritKind, n: usize, b: f64, k0: usize, k1: usize, p_value: *mut f64) -> HicritStatus {
    guard(|| {
        let dst = out(p_value, "p_value")?;
        *dst = tail_pvalue(kind.into(), n, b, k0, k1).map_err(fail)?.p_value;
        Ok(())
    })
}

/// Threshold with analytic tail probability `alpha`.
///
/// # Safety
/// `b` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_threshold(kind: HicritKind, n: usize, alpha: f64, k0: usize, k1: usize, b: *mut f64) -> HicritStatus {
    guard(|| {
        let dst = out(b, "b")?;
        *dst = threshold(kind.into(), n, alpha, k0, k1).map_err(fail)?;
        Ok(())
    })
}

/// Exact null crossing probability of the boundary for threshold `b`
/// (not available for `HICRIT_KIND_MHC`).
///
/// # Safety
/// `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_exact_pvalue(kind: HicritKind, n: usize, b: f64, k0: usize, k1: usize, p_value: *mut f64) -> HicritStatus {
    guard(|| {
        let dst = out(p_value, "p_value")?;
        if kind == HicritKind::Mhc {
            return Err(fail(Error::Domain("the exact method does not cover the modified HC statistic".into())));
        }
        let bv = boundary_vector(kind.into(), n, b, k0, k1).map_err(fail)?;
        *dst = crossing_probability(n, &bv).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `out_rule` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_rule_new(
    kind: HicritKind,
    n: usize,
    b: f64,
    k0: usize,
    k1: usize,
    out_rule: *mut *mut HicritRule,
) -> HicritStatus {
    guard(|| {
        let dst = out(out_rule, "out_rule")?;
        let rule = RejectionRule::new(StatisticSpec::new(kind.into(), k0, k1), n, b).map_err(fail)?;
        *dst = Box::into_raw(Box::new(HicritRule(rule)));
        Ok(())
    })
}

/// # Safety
/// `rule` must come from [`hicrit_rule_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hicrit_rule_free(rule: *mut HicritRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Whether the rule rejects `sample`, whose size must match the rule's `n`.
///
/// # Safety
/// Handles must be live; `rejects` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_rule_rejects(rule: *const HicritRule, sample: *const HicritSample, rejects: *mut bool) -> HicritStatus {
    guard(|| {
        let r = handle(rule, "rule")?;
        let s = handle(sample, "sample")?;
        let dst = out(rejects, "rejects")?;
        if r.0.n() != s.0.n() {
            return Err(fail(Error::Input(format!("rule built for n = {} but sample has {}", r.0.n(), s.0.n()))));
        }
        *dst = r.0.rejects(&s.0);
        Ok(())
    })
}

/// Analytic power for one-sided p-values with signal fraction `p` and fixed
/// mean `delta`.
///
/// # Safety
/// `power` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_analytic_power(
    kind: HicritKind,
    n: usize,
    b: f64,
    k0: usize,
    k1: usize,
    p: f64,
    delta: f64,
    power: *mut f64,
) -> HicritStatus {
    guard(|| {
        let dst = out(power, "power")?;
        *dst = analytic_power(kind.into(), n, b, k0, k1, &MixtureModel::fixed(p, delta))
            .map_err(fail)?
            .power;
        Ok(())
    })
}

/// Simulated power; signal means are `N(mu, delta_sd^2)`.
///
/// # Safety
/// `power` must be writable; `se` may be null.
#[no_mangle]
pub unsafe extern "C" fn hicrit_mc_power(
    kind: HicritKind,
    n: usize,
    b: f64,
    k0: usize,
    k1: usize,
    p: f64,
    mu: f64,
    delta_sd: f64,
    two_sided: bool,
    replicates: u64,
    seed: u64,
    power: *mut f64,
    se: *mut f64,
) -> HicritStatus {
    guard(|| {
        let dst = out(power, "power")?;
        let model = MixtureModel {
            p,
            mu,
            delta_sd,
            sided: if two_sided { Sided::Two } else { Sided::One },
            count_mode: CountMode::Binomial,
        };
        let res = mc_power(&StatisticSpec::new(kind.into(), k0, k1), n, b, &model, replicates, seed).map_err(fail)?;
        *dst = res.power;
        if let Some(e) = se.as_mut() {
            *e = res.se.unwrap_or(0.0);
        }
        Ok(())
    })
}

/// Lower confidence bound for the fraction of false nulls. `kind` must be
/// `HICRIT_KIND_MBJ` or `HICRIT_KIND_MHC`.
///
/// # Safety
/// `sample` must be live; `lambda_hat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_lower_bound(sample: *const HicritSample, kind: HicritKind, alpha: f64, lambda_hat: *mut f64) -> HicritStatus {
    guard(|| {
        let s = handle(sample, "sample")?;
        let dst = out(lambda_hat, "lambda_hat")?;
        let bk = match kind {
            HicritKind::Mbj => BoundKind::Mbj,
            HicritKind::Mhc => BoundKind::Mhc,
            _ => return Err(fail(Error::Domain("lower bounds use the MBJ or MHC functional".into()))),
        };
        *dst = lower_bound(bk, &s.0, alpha).map_err(fail)?.lambda_hat;
        Ok(())
    })
}

/// Copies an `n_seq x t_len` row-major matrix. `sigma` holds one noise scale
/// per sequence, or is null for unit scales.
///
/// # Safety
/// `y` must point to `n_seq * t_len` doubles, `sigma` to `n_seq` doubles or
/// be null; `out_dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_dataset_new(
    y: *const f64,
    n_seq: usize,
    t_len: usize,
    sigma: *const f64,
    out_dataset: *mut *mut HicritDataset,
) -> HicritStatus {
    guard(|| {
        let cells = n_seq
            .checked_mul(t_len)
            .ok_or_else(|| fail(Error::Input("matrix size overflows".into())))?;
        let values = slice(y, cells, "y")?.to_vec();
        let scales = if sigma.is_null() {
            vec![1.0; n_seq]
        } else {
            slice(sigma, n_seq, "sigma")?.to_vec()
        };
        let dst = out(out_dataset, "out_dataset")?;
        let ds = ScanDataset::new(n_seq, t_len, values, scales).map_err(fail)?;
        *dst = Box::into_raw(Box::new(HicritDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`hicrit_dataset_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hicrit_dataset_free(dataset: *mut HicritDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Sorted p-values of the standardized sums over `[start, start + len)`.
///
/// # Safety
/// `dataset` must be live; `out_sample` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_interval_pvalues(
    dataset: *const HicritDataset,
    start: usize,
    len: usize,
    out_sample: *mut *mut HicritSample,
) -> HicritStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let dst = out(out_sample, "out_sample")?;
        let sample = hicrit::scan::interval_pvalues(&ds.0, Interval { start, len }).map_err(fail)?;
        *dst = Box::into_raw(Box::new(HicritSample(sample)));
        Ok(())
    })
}

/// Scans all intervals of length `1..=max_len` at global level `alpha`
/// with default indices (`k0 = 4` for HC, else 1; `k1 = N / 2`).
///
/// # Safety
/// `dataset` must be live; `out_result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_scan(
    dataset: *const HicritDataset,
    kind: HicritKind,
    max_len: usize,
    alpha: f64,
    out_result: *mut *mut HicritScanResult,
) -> HicritStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let dst = out(out_result, "out_result")?;
        let res = scan(&ds.0, &ScanConfig::new(kind.into(), max_len, alpha)).map_err(fail)?;
        *dst = Box::into_raw(Box::new(HicritScanResult(res)));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`hicrit_scan`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hicrit_scan_result_free(result: *mut HicritScanResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of detections, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hicrit_scan_result_len(result: *const HicritScanResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.detections.len())
}

/// Per-interval threshold used by the scan, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hicrit_scan_result_threshold(result: *const HicritScanResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.per_interval_threshold)
}

/// Detection `index` in order of position.
///
/// # Safety
/// `result` must be live; `detection` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hicrit_scan_result_get(
    result: *const HicritScanResult,
    index: usize,
    detection: *mut HicritDetection,
) -> HicritStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let dst = out(detection, "detection")?;
        let d = r.0.detections.get(index).ok_or_else(|| {
            fail(Error::Input(format!("detection {index} out of range ({} found)", r.0.detections.len())))
        })?;
        *dst = HicritDetection {
            start: d.interval.start,
            len: d.interval.len,
            value: d.value,
        };
        Ok(())
    })
}

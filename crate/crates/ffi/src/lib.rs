//! C ABI over `agree-kit`.
//!
//! Datasets live behind an opaque `AkDataset` handle. Every fallible call
//! returns an `AkStatus`; on failure `ak_last_error_message` holds the text
//! for the calling thread. Strings returned by the library are released with
//! `ak_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use agree_kit::pipeline::{self, Dataset, Format};
use agree_kit::resolve::{aggregate, AggregateConfig, Rounding, Strategy};
use agree_kit::scheme::{reduce_label, ClassLabel, Scheme};
use agree_kit::vote::Counting;
use agree_kit::{Error, ErrorClass};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AkStatus {
    Ok = 0,
    /// Bad input data or configuration.
    Validation = 2,
    /// Missing or extra ids.
    Coverage = 3,
    Io = 4,
    NullPointer = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

/// Parsed annotation dataset.
pub struct AkDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(err: Error) -> AkStatus {
    set_error(err.to_string());
    match err.class() {
        ErrorClass::Validation => AkStatus::Validation,
        ErrorClass::Coverage => AkStatus::Coverage,
        ErrorClass::Io => AkStatus::Io,
    }
}

fn guarded(f: impl FnOnce() -> AkStatus) -> AkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        AkStatus::Panic
    })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AkStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(AkStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        AkStatus::InvalidUtf8
    })
}

fn scheme_from(classes: u32) -> Result<Scheme, AkStatus> {
    match classes {
        6 => Ok(Scheme::Six),
        4 => Ok(Scheme::Four),
        2 => Ok(Scheme::Two),
        other => Err(fail(Error::Config(format!("unknown scheme {other}")))),
    }
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ak_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses `len` bytes of JSONL (`csv == 0`) or CSV (`csv != 0`).
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ak_dataset_parse(
    data: *const u8,
    len: usize,
    csv: i32,
    out: *mut *mut AkDataset,
) -> AkStatus {
    guarded(|| {
        if data.is_null() || out.is_null() {
            set_error("null argument");
            return AkStatus::NullPointer;
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let format = if csv != 0 { Format::Csv } else { Format::Jsonl };
        match pipeline::parse_bytes(bytes, format, "<ffi>") {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(AkDataset { inner: ds }));
                AkStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of items in the dataset; 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle from `ak_dataset_parse`.
#[no_mangle]
pub unsafe extern "C" fn ak_dataset_len(ds: *const AkDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ak_dataset_free(ds: *mut AkDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Aggregates every item and writes one JSON object per line into `*out`.
/// Items without a clear majority under `simple`/`weighted` are skipped.
/// `seed` is used only when `has_seed != 0`; `half_even != 0` selects
/// half-to-even rounding for mean strategies.
///
/// # Safety
/// `ds` must be a live handle, `strategy` a NUL-terminated string and `out`
/// writable. The returned string must be freed with `ak_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ak_aggregate_jsonl(
    ds: *const AkDataset,
    scheme: u32,
    strategy: *const c_char,
    has_seed: i32,
    seed: u64,
    half_even: i32,
    out: *mut *mut c_char,
) -> AkStatus {
    guarded(|| {
        let Some(ds) = ds.as_ref() else {
            set_error("dataset is null");
            return AkStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return AkStatus::NullPointer;
        }
        let strategy = match str_arg(strategy, "strategy") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let scheme = match scheme_from(scheme) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let strategy: Strategy = match strategy.parse() {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let cfg = AggregateConfig {
            counting: Counting::Incidence,
            rounding: if half_even != 0 {
                Rounding::HalfEven
            } else {
                Rounding::HalfUp
            },
            seed: (has_seed != 0).then_some(seed),
        };
        let mut text = String::new();
        for item in &ds.inner.items {
            match aggregate(item, scheme, strategy, &cfg) {
                Ok(o) => {
                    text.push_str(&serde_json::to_string(&o).expect("outcome serializes"));
                    text.push('\n');
                }
                Err(Error::Unresolvable { .. }) => {}
                Err(e) => return fail(e),
            }
        }
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        AkStatus::Ok
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ak_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Maps a six-class label into the 6-, 4- or 2-class scheme.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ak_reduce_label(label: u8, scheme: u32, out: *mut u8) -> AkStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return AkStatus::NullPointer;
        }
        let scheme = match scheme_from(scheme) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match reduce_label(ClassLabel(label), scheme) {
            Ok(l) => {
                *out = l.0;
                AkStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// `alpha * s_r + (1 - alpha) * s_c` for normalized scores.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ak_ensemble_score(
    s_r: f64,
    s_c: f64,
    alpha: f64,
    out: *mut f64,
) -> AkStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return AkStatus::NullPointer;
        }
        match agree_kit::strength::ensemble_score(s_r, s_c, alpha) {
            Ok(v) => {
                *out = v;
                AkStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// 1 when `mean_strength > threshold`, else 0.
#[no_mangle]
pub extern "C" fn ak_binarize(mean_strength: f64, threshold: f64) -> u8 {
    u8::from(mean_strength > threshold)
}

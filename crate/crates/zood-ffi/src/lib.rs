//! C bindings for ranking feature bundles and selecting feature columns.
//!
//! Callers hold bundles through opaque `ZoodBundle` pointers, every entry
//! point returns a `ZoodStatus`, and the message for the most recent failure
//! on the current thread is available from `zood_last_error_message`. The
//! generated header lands in `include/zood.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use zood::io::{self, FeatureBundle, IoError};
use zood::ranking::{rank_zoo, zood_score, MultiDomainDataset, RankingError, ScoreNormalization};
use zood::select::{select_features_multi, SelectError, SelectPriors};

/// Result of every entry point. Anything other than `Ok` leaves a
/// description in `zood_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoodStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidString = 2,
    /// The filesystem or the file encoding failed.
    Io = 3,
    /// Inputs were structurally invalid (shapes, labels, domains, priors).
    InvalidData = 4,
    /// A numerical routine could not produce a finite result.
    Numeric = 5,
    /// The library aborted an internal invariant violation.
    Internal = 6,
}

/// A model's features with labels and domain assignments. Opaque; create
/// through `zood_bundle_create` or `zood_bundle_read` and release with
/// `zood_bundle_free`.
pub struct ZoodBundle {
    inner: FeatureBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: ZoodStatus, msg: &str) -> ZoodStatus {
    set_error(msg);
    status
}

fn io_status(err: &IoError) -> ZoodStatus {
    match err {
        IoError::UnknownDataset(_) | IoError::ManifestDuplicate(_) | IoError::InvalidBundle(_) => {
            ZoodStatus::InvalidData
        }
        _ => ZoodStatus::Io,
    }
}

fn ranking_status(err: &RankingError) -> ZoodStatus {
    match err {
        RankingError::Evidence(_)
        | RankingError::ClassEvidence { .. }
        | RankingError::CovarianceDegenerate => ZoodStatus::Numeric,
        RankingError::Split { source, .. } => ranking_status(source),
        _ => ZoodStatus::InvalidData,
    }
}

fn select_status(err: &SelectError) -> ZoodStatus {
    match err {
        SelectError::NumericalUnderflow { .. }
        | SelectError::NonFinite
        | SelectError::SingularSystem => ZoodStatus::Numeric,
        SelectError::Step { source, .. } => select_status(source),
        _ => ZoodStatus::InvalidData,
    }
}

/// Runs the body behind a panic guard so unwinding never crosses the ABI.
fn guarded(body: impl FnOnce() -> ZoodStatus) -> ZoodStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected internal panic".into());
            fail(ZoodStatus::Internal, &msg)
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, ZoodStatus> {
    if ptr.is_null() {
        return Err(fail(ZoodStatus::NullArgument, &format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(ZoodStatus::InvalidString, &format!("{what} is not UTF-8")))
}

fn dataset_of(bundle: &FeatureBundle) -> Result<MultiDomainDataset, ZoodStatus> {
    let class_count = bundle.labels.iter().max().map_or(0, |m| m + 1);
    let domain_count = bundle.domains.iter().max().map_or(0, |m| m + 1);
    MultiDomainDataset::new(
        bundle.features.clone(),
        bundle.labels.clone(),
        bundle.domains.clone(),
        class_count,
        domain_count,
    )
    .map_err(|e| fail(ranking_status(&e), &e.to_string()))
}

/// Message for the most recent failure on the calling thread, empty if no
/// call has failed yet. The pointer stays valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn zood_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a bundle from row-major features and per-sample labels/domains.
///
/// # Safety
/// `features` must point to `sample_count * feature_count` doubles, and
/// `labels` and `domains` to `sample_count` values each. `model_id` must be
/// a NUL-terminated string. On success `*out` owns the bundle and must be
/// released with `zood_bundle_free`.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_create(
    model_id: *const c_char,
    features: *const f64,
    sample_count: usize,
    feature_count: usize,
    labels: *const u32,
    domains: *const u32,
    out: *mut *mut ZoodBundle,
) -> ZoodStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ZoodStatus::NullArgument, "out is null");
        }
        if features.is_null() || labels.is_null() || domains.is_null() {
            return fail(ZoodStatus::NullArgument, "features, labels, and domains are required");
        }
        let model_id = match unsafe { utf8_arg(model_id, "model_id") } {
            Ok(s) => s.to_string(),
            Err(status) => return status,
        };
        let Some(cells) = sample_count.checked_mul(feature_count) else {
            return fail(ZoodStatus::InvalidData, "sample_count * feature_count overflows");
        };
        let values = unsafe { std::slice::from_raw_parts(features, cells) };
        let matrix = DMatrix::from_row_slice(sample_count, feature_count, values);
        let labels = unsafe { std::slice::from_raw_parts(labels, sample_count) }
            .iter()
            .map(|&v| v as usize)
            .collect();
        let domains = unsafe { std::slice::from_raw_parts(domains, sample_count) }
            .iter()
            .map(|&v| v as usize)
            .collect();
        let bundle = FeatureBundle {
            model_id,
            features: matrix,
            labels,
            domains,
            column_provenance: None,
        };
        if let Err(e) = bundle.validate() {
            return fail(ZoodStatus::InvalidData, &e.to_string());
        }
        unsafe { *out = Box::into_raw(Box::new(ZoodBundle { inner: bundle })) };
        ZoodStatus::Ok
    })
}

/// Reads a bundle file (binary or CSV, auto-detected).
///
/// # Safety
/// `path` must be a NUL-terminated string. On success `*out` owns the
/// bundle and must be released with `zood_bundle_free`.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_read(
    path: *const c_char,
    out: *mut *mut ZoodBundle,
) -> ZoodStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ZoodStatus::NullArgument, "out is null");
        }
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match io::read_bundle(Path::new(path)) {
            Ok(bundle) => {
                unsafe { *out = Box::into_raw(Box::new(ZoodBundle { inner: bundle })) };
                ZoodStatus::Ok
            }
            Err(e) => fail(io_status(&e), &e.to_string()),
        }
    })
}

/// Writes a bundle (`.csv` extension selects the text encoding).
///
/// # Safety
/// `bundle` must come from this library and `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_write(
    bundle: *const ZoodBundle,
    path: *const c_char,
) -> ZoodStatus {
    guarded(|| {
        let Some(bundle) = (unsafe { bundle.as_ref() }) else {
            return fail(ZoodStatus::NullArgument, "bundle is null");
        };
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match io::write_bundle(&bundle.inner, Path::new(path)) {
            Ok(()) => ZoodStatus::Ok,
            Err(e) => fail(io_status(&e), &e.to_string()),
        }
    })
}

/// Number of samples, or 0 when `bundle` is null.
///
/// # Safety
/// `bundle` must be null or a pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_sample_count(bundle: *const ZoodBundle) -> usize {
    unsafe { bundle.as_ref() }.map_or(0, |b| b.inner.features.nrows())
}

/// Number of feature columns, or 0 when `bundle` is null.
///
/// # Safety
/// `bundle` must be null or a pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_feature_count(bundle: *const ZoodBundle) -> usize {
    unsafe { bundle.as_ref() }.map_or(0, |b| b.inner.features.ncols())
}

/// Releases a bundle. Null is ignored.
///
/// # Safety
/// `bundle` must be null or an owned pointer from this library, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zood_bundle_free(bundle: *mut ZoodBundle) {
    if !bundle.is_null() {
        drop(unsafe { Box::from_raw(bundle) });
    }
}

/// Scores one bundle by leave-one-domain-out evidence; writes the total
/// score and the covariate scale factor.
///
/// # Safety
/// `bundle` must come from this library; `out_score` and `out_lambda` must
/// be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn zood_score_bundle(
    bundle: *const ZoodBundle,
    out_score: *mut f64,
    out_lambda: *mut f64,
) -> ZoodStatus {
    guarded(|| {
        let Some(bundle) = (unsafe { bundle.as_ref() }) else {
            return fail(ZoodStatus::NullArgument, "bundle is null");
        };
        if out_score.is_null() || out_lambda.is_null() {
            return fail(ZoodStatus::NullArgument, "out_score and out_lambda are required");
        }
        let dataset = match dataset_of(&bundle.inner) {
            Ok(d) => d,
            Err(status) => return status,
        };
        match zood_score(&dataset, &bundle.inner.model_id) {
            Ok(score) => {
                unsafe {
                    *out_score = score.score;
                    *out_lambda = score.lambda;
                }
                ZoodStatus::Ok
            }
            Err(e) => fail(ranking_status(&e), &e.to_string()),
        }
    })
}

/// Ranks a zoo of bundles sharing labels and domains. `out_order` receives
/// indices into `bundles` from best to worst and `out_scores` the matching
/// scores; both must hold `count` entries.
///
/// # Safety
/// `bundles` must point to `count` non-null bundle pointers from this
/// library; the output arrays must hold `count` writable entries.
#[no_mangle]
pub unsafe extern "C" fn zood_rank_bundles(
    bundles: *const *const ZoodBundle,
    count: usize,
    out_order: *mut usize,
    out_scores: *mut f64,
) -> ZoodStatus {
    guarded(|| {
        if bundles.is_null() || out_order.is_null() || out_scores.is_null() {
            return fail(ZoodStatus::NullArgument, "bundles, out_order, and out_scores are required");
        }
        if count == 0 {
            return fail(ZoodStatus::InvalidData, "count must be positive");
        }
        let handles = unsafe { std::slice::from_raw_parts(bundles, count) };
        let mut zoo = Vec::with_capacity(count);
        for (i, &handle) in handles.iter().enumerate() {
            let Some(bundle) = (unsafe { handle.as_ref() }) else {
                return fail(ZoodStatus::NullArgument, &format!("bundle {i} is null"));
            };
            zoo.push(bundle.inner.clone());
        }
        let ranked = match rank_zoo(&zoo, ScoreNormalization::PerSample) {
            Ok(r) => r,
            Err(e) => return fail(ranking_status(&e), &e.to_string()),
        };
        for (slot, score) in ranked.iter().enumerate() {
            let index = zoo
                .iter()
                .position(|b| b.model_id == score.model_id)
                .expect("ranked ids come from this zoo");
            unsafe {
                *out_order.add(slot) = index;
                *out_scores.add(slot) = score.score;
            }
        }
        ZoodStatus::Ok
    })
}

/// Selects feature columns of one bundle against its one-hot labels with
/// the spike-and-slab selector at the given prior inclusion probability and
/// threshold. `out_mask` must hold one byte per feature column; entries are
/// set to 1 for kept columns. `out_selected` receives the kept count.
///
/// # Safety
/// `bundle` must come from this library, `out_mask` must hold
/// `zood_bundle_feature_count(bundle)` writable bytes, and `out_selected`
/// must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn zood_select_columns(
    bundle: *const ZoodBundle,
    prior_inclusion: f64,
    threshold: f64,
    seed: u64,
    out_mask: *mut u8,
    out_selected: *mut usize,
) -> ZoodStatus {
    guarded(|| {
        let Some(bundle) = (unsafe { bundle.as_ref() }) else {
            return fail(ZoodStatus::NullArgument, "bundle is null");
        };
        if out_mask.is_null() || out_selected.is_null() {
            return fail(ZoodStatus::NullArgument, "out_mask and out_selected are required");
        }
        let labels = &bundle.inner.labels;
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut targets = DMatrix::zeros(labels.len(), classes);
        for (r, &l) in labels.iter().enumerate() {
            targets[(r, l)] = 1.0;
        }
        let priors = SelectPriors {
            pi0: prior_inclusion,
            tau: threshold,
            seed,
            ..SelectPriors::default()
        };
        match select_features_multi(&bundle.inner.features, &targets, &priors) {
            Ok(result) => {
                let mut kept = 0;
                for (i, &keep) in result.mask.iter().enumerate() {
                    unsafe { *out_mask.add(i) = u8::from(keep) };
                    kept += usize::from(keep);
                }
                unsafe { *out_selected = kept };
                ZoodStatus::Ok
            }
            Err(e) => fail(select_status(&e), &e.to_string()),
        }
    })
}

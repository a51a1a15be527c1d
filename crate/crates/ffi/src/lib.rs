//! C ABI over the datalens engine.
//!
//! Conventions:
//! - Every fallible function returns a [`DlStatus`]; on failure a message is
//!   available from [`dl_last_error`] on the same thread.
//! - Handles (`DlDataset`, `DlView`, `DlRatings`) are opaque and freed with
//!   their `*_free` function. Passing NULL to a `*_free` is a no-op.
//! - Strings in are NUL-terminated UTF-8. Strings out are allocated by the
//!   library and released with [`dl_string_free`].
//! - Structured inputs and outputs are JSON documents: selections use the
//!   query engine's `Selection` shape, outputs match the CLI's `--format
//!   json` documents.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::Value;

use datalens::ingest::IngestError;
use datalens::parse::{repair_mojibake, ParseError};
use datalens::query::partition_by_dataset;
use datalens::render::{stats_json, timeline_geometry, treemap_geometry, TimelinePanel};
use datalens::treemap::nodes_for;
use datalens::{
    apply_selection, compute_stats, from_unified_str, ingest_archive, layout, list_archive, merge, to_unified_string,
    Dataset, ExportArchive, IngestConfig, IngestRequest, LayoutError, ModelError, RatingError, RatingStore, Scale,
    Selection, SignatureTable,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON argument or out-of-range number.
    InvalidArgument = 3,
    /// Corrupt zip, path traversal, oversize entry.
    Archive = 4,
    UnknownService = 5,
    /// Unified document or rule table failed validation.
    Validation = 6,
    /// Every treemap node has zero weight for the chosen scale.
    DegenerateLayout = 7,
    UnknownElement = 8,
    Io = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DlStatus, String);

type Res<T> = Result<T, Failure>;

fn fail<T>(status: DlStatus, message: impl ToString) -> Res<T> {
    Err(Failure(status, message.to_string()))
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Res<()>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal error: panic inside datalens");
            DlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return fail(DlStatus::NullArgument, format!("{what} is NULL"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(DlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Res<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, what: &str) -> Res<&'a [u8]> {
    if p.is_null() {
        return fail(DlStatus::NullArgument, format!("{what} is NULL"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(DlStatus::NullArgument, format!("{what} is NULL")), Ok)
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Res<&'a mut T> {
    p.as_mut()
        .map_or_else(|| fail(DlStatus::NullArgument, format!("{what} is NULL")), Ok)
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Res<()> {
    if out.is_null() {
        return fail(DlStatus::NullArgument, format!("{what} is NULL"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Res<()> {
    let c = CString::new(s).or_else(|_| fail(DlStatus::Panic, "output contains NUL"))?;
    put(out, c.into_raw(), "output pointer")
}

unsafe fn put_json(out: *mut *mut c_char, v: &Value) -> Res<()> {
    put_string(out, v.to_string())
}

unsafe fn selection_arg(p: *const c_char) -> Res<Selection> {
    let Some(text) = opt_str_arg(p, "selection_json")? else {
        return Ok(Selection::all());
    };
    let sel: Selection =
        serde_json::from_str(text).or_else(|e| fail(DlStatus::InvalidArgument, format!("selection: {e}")))?;
    sel.validate().or_else(|e| fail(DlStatus::InvalidArgument, e))?;
    Ok(sel)
}

fn ingest_failure(e: ParseError) -> Failure {
    let status = match &e {
        ParseError::Ingest(IngestError::UnknownService)
        | ParseError::Rules(datalens::parse::RuleError::UnknownService(_)) => DlStatus::UnknownService,
        ParseError::Ingest(IngestError::Io(_)) => DlStatus::Io,
        ParseError::Ingest(_) => DlStatus::Archive,
        ParseError::Rules(_) | ParseError::Model(_) => DlStatus::Validation,
    };
    Failure(status, e.to_string())
}

fn model_failure(e: ModelError) -> Failure {
    let status = match e {
        ModelError::Io(_) => DlStatus::Io,
        _ => DlStatus::Validation,
    };
    Failure(status, e.to_string())
}

fn rating_failure(e: RatingError) -> Failure {
    let status = match e {
        RatingError::OutOfRange(_) => DlStatus::InvalidArgument,
        RatingError::UnknownElement(_) => DlStatus::UnknownElement,
        RatingError::Malformed(_) => DlStatus::Validation,
        RatingError::Io(_) => DlStatus::Io,
    };
    Failure(status, e.to_string())
}

/// A parsed dataset.
pub struct DlDataset {
    dataset: Dataset,
}

/// Several datasets explored together.
pub struct DlView {
    datasets: Vec<Dataset>,
}

/// Sensitivity ratings held in memory.
pub struct DlRatings {
    store: RatingStore,
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn dl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Detects the service of a zip archive; writes its name to `out`.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_detect_service(bytes: *const u8, len: usize, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let bytes = bytes_arg(bytes, len, "bytes")?;
        let listing = list_archive(bytes).map_err(|e| Failure(DlStatus::Archive, e.to_string()))?;
        let service = datalens::detect_service(&listing, &SignatureTable::builtin()).map_err(|e| match e {
            IngestError::UnknownService => Failure(DlStatus::UnknownService, e.to_string()),
            e => Failure(DlStatus::Archive, e.to_string()),
        })?;
        put_string(out, service)
    })
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct IngestOptions {
    service: Option<String>,
    dataset_id: Option<String>,
    ingested_at: Option<DateTime<Utc>>,
}

/// Ingests a zip archive held in memory.
///
/// `options_json` may be NULL or `{"service": .., "dataset_id": ..,
/// "ingested_at": ..}` with every field optional. On success `out` receives
/// a new dataset and, when `report_out` is not NULL, the parse report as
/// JSON.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `name` and `options_json`
/// must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_dataset_ingest(
    bytes: *const u8,
    len: usize,
    name: *const c_char,
    options_json: *const c_char,
    out: *mut *mut DlDataset,
    report_out: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let bytes = bytes_arg(bytes, len, "bytes")?;
        let name = opt_str_arg(name, "name")?.unwrap_or("archive.zip");
        let options: IngestOptions = match opt_str_arg(options_json, "options_json")? {
            None => IngestOptions::default(),
            Some(t) => serde_json::from_str(t).or_else(|e| fail(DlStatus::InvalidArgument, format!("options: {e}")))?,
        };
        if out.is_null() {
            return fail(DlStatus::NullArgument, "out is NULL");
        }
        let archive =
            ExportArchive::open(name, bytes.to_vec()).map_err(|e| Failure(DlStatus::Archive, e.to_string()))?;
        let request = IngestRequest {
            service: options.service,
            dataset_id: options.dataset_id,
            ingested_at: options.ingested_at,
        };
        let ingested = ingest_archive(&archive, &request, &IngestConfig::default()).map_err(ingest_failure)?;
        if !report_out.is_null() {
            let report = serde_json::to_value(&ingested.report).unwrap_or(Value::Null);
            put_json(report_out, &report)?;
        }
        put(
            out,
            Box::into_raw(Box::new(DlDataset {
                dataset: ingested.dataset,
            })),
            "out",
        )
    })
}

/// Loads a unified document.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_dataset_from_unified(json: *const c_char, out: *mut *mut DlDataset) -> DlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let dataset = from_unified_str(text).map_err(model_failure)?;
        put(out, Box::into_raw(Box::new(DlDataset { dataset })), "out")
    })
}

/// Serializes a dataset as a unified document.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_dataset_to_unified(ds: *const DlDataset, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        put_string(out, to_unified_string(&ds.dataset))
    })
}

/// Writes the dataset id to `out`.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_dataset_id(ds: *const DlDataset, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        put_string(out, ds.dataset.dataset_id.clone())
    })
}

/// # Safety
/// `ds` must be NULL or a dataset handle not freed yet.
#[no_mangle]
pub unsafe extern "C" fn dl_dataset_free(ds: *mut DlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Creates an empty view.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_view_new(out: *mut *mut DlView) -> DlStatus {
    guard(|| put(out, Box::into_raw(Box::new(DlView { datasets: Vec::new() })), "out"))
}

/// Adds a copy of `ds` to the view. Fails if a dataset with the same id is
/// already present.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn dl_view_add_dataset(view: *mut DlView, ds: *const DlDataset) -> DlStatus {
    guard(|| {
        let view = handle_mut(view, "view")?;
        let ds = handle(ds, "dataset")?;
        if view.datasets.iter().any(|d| d.dataset_id == ds.dataset.dataset_id) {
            return fail(
                DlStatus::InvalidArgument,
                format!("dataset id {:?} is already in the view", ds.dataset.dataset_id),
            );
        }
        view.datasets.push(ds.dataset.clone());
        Ok(())
    })
}

/// Removes the dataset with `dataset_id`; a missing id is not an error.
///
/// # Safety
/// `view` must be live; `dataset_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dl_view_remove_dataset(view: *mut DlView, dataset_id: *const c_char) -> DlStatus {
    guard(|| {
        let view = handle_mut(view, "view")?;
        let id = str_arg(dataset_id, "dataset_id")?;
        view.datasets.retain(|d| d.dataset_id != id);
        Ok(())
    })
}

/// # Safety
/// `view` must be NULL or a view handle not freed yet.
#[no_mangle]
pub unsafe extern "C" fn dl_view_free(view: *mut DlView) {
    if !view.is_null() {
        drop(Box::from_raw(view));
    }
}

fn element_json(e: &datalens::DataElement) -> Value {
    let mut v = serde_json::to_value(e).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.insert("dataset_id".into(), Value::String(e.dataset_id.clone()));
    }
    v
}

/// Selected elements in view order as a JSON array.
///
/// # Safety
/// `view` must be live; `selection_json` NULL (select all) or
/// NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dl_view_select(
    view: *const DlView,
    selection_json: *const c_char,
    out: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let view = handle(view, "view")?;
        let sel = selection_arg(selection_json)?;
        let merged = merge(&view.datasets).or_else(|e| fail(DlStatus::InvalidArgument, e))?;
        let items: Vec<Value> = apply_selection(&merged, &sel).into_iter().map(element_json).collect();
        put_json(out, &Value::Array(items))
    })
}

/// Stats over the selection, same document as `datalens stats --format json`.
///
/// # Safety
/// As for [`dl_view_select`].
#[no_mangle]
pub unsafe extern "C" fn dl_view_stats(
    view: *const DlView,
    selection_json: *const c_char,
    out: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let view = handle(view, "view")?;
        let sel = selection_arg(selection_json)?;
        let merged = merge(&view.datasets).or_else(|e| fail(DlStatus::InvalidArgument, e))?;
        put_json(out, &stats_json(&compute_stats(&merged, &sel)))
    })
}

/// Timeline points of the selection. With `split` one panel per dataset in
/// insertion order, otherwise a single merged panel.
///
/// # Safety
/// As for [`dl_view_select`].
#[no_mangle]
pub unsafe extern "C" fn dl_view_timeline(
    view: *const DlView,
    selection_json: *const c_char,
    tz_offset_seconds: i32,
    split: bool,
    out: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let view = handle(view, "view")?;
        let sel = selection_arg(selection_json)?;
        if tz_offset_seconds.abs() >= 86_400 {
            return fail(DlStatus::InvalidArgument, "tz offset must be under one day");
        }
        let merged = merge(&view.datasets).or_else(|e| fail(DlStatus::InvalidArgument, e))?;
        let parts = partition_by_dataset(&merged, &sel, tz_offset_seconds);
        let panels: Vec<TimelinePanel> = if split {
            parts
                .into_iter()
                .map(|(d, points)| TimelinePanel {
                    label: d.dataset_id.clone(),
                    points,
                })
                .collect()
        } else {
            let mut points: Vec<_> = parts.into_iter().flat_map(|(_, p)| p).collect();
            points.sort_by(|a, b| datalens::model::element_order(a.element, b.element));
            vec![TimelinePanel {
                label: "merged".into(),
                points,
            }]
        };
        put_json(out, &timeline_geometry(&panels, tz_offset_seconds))
    })
}

/// Treemap geometry over the files of the view. Only `dataset_ids` of the
/// selection is honored; `scale` is "size" or "count".
///
/// # Safety
/// As for [`dl_view_select`]; `scale` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dl_view_treemap(
    view: *const DlView,
    selection_json: *const c_char,
    scale: *const c_char,
    width: f64,
    height: f64,
    out: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let view = handle(view, "view")?;
        let sel = selection_arg(selection_json)?;
        let scale: Scale = str_arg(scale, "scale")?
            .parse()
            .or_else(|e: String| fail(DlStatus::InvalidArgument, e))?;
        let files = view
            .datasets
            .iter()
            .filter(|d| sel.dataset_ids.is_empty() || sel.dataset_ids.contains(&d.dataset_id))
            .flat_map(|d| d.files());
        let nodes = nodes_for(files, scale);
        let rects = layout(&nodes, width, height).map_err(|e| {
            let status = match e {
                LayoutError::AllZeroWeights => DlStatus::DegenerateLayout,
                _ => DlStatus::InvalidArgument,
            };
            Failure(status, e.to_string())
        })?;
        put_json(out, &treemap_geometry(&rects, width, height, scale))
    })
}

/// Empty in-memory rating store.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_new(out: *mut *mut DlRatings) -> DlStatus {
    guard(|| {
        put(
            out,
            Box::into_raw(Box::new(DlRatings {
                store: RatingStore::new(),
            })),
            "out",
        )
    })
}

/// Loads a ratings file; a missing file yields an empty store.
///
/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_load_file(path: *const c_char, out: *mut *mut DlRatings) -> DlStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let store = RatingStore::load(&path).map_err(rating_failure)?;
        put(out, Box::into_raw(Box::new(DlRatings { store })), "out")
    })
}

/// Writes the store atomically to `path`.
///
/// # Safety
/// `ratings` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_save_file(ratings: *const DlRatings, path: *const c_char) -> DlStatus {
    guard(|| {
        let r = handle(ratings, "ratings")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        r.store.save(&path).map_err(rating_failure)
    })
}

/// Parses a ratings document (for environments without file access).
///
/// # Safety
/// `json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_from_json(json: *const c_char, out: *mut *mut DlRatings) -> DlStatus {
    guard(|| {
        let store = RatingStore::from_json(str_arg(json, "json")?).map_err(rating_failure)?;
        put(out, Box::into_raw(Box::new(DlRatings { store })), "out")
    })
}

/// Serializes the store as a ratings document.
///
/// # Safety
/// `ratings` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_to_json(ratings: *const DlRatings, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let r = handle(ratings, "ratings")?;
        put_string(out, r.store.to_json())
    })
}

/// Rates an element of the view; `rated_at` is seconds since the epoch.
/// The rating is kept in memory; persist with [`dl_ratings_save_file`].
///
/// # Safety
/// Handles live; `element_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_rate(
    ratings: *mut DlRatings,
    view: *const DlView,
    element_id: *const c_char,
    value: f64,
    rated_at: i64,
) -> DlStatus {
    guard(|| {
        let r = handle_mut(ratings, "ratings")?;
        let view = handle(view, "view")?;
        let id = str_arg(element_id, "element_id")?;
        let at = DateTime::from_timestamp(rated_at, 0)
            .map_or_else(|| fail(DlStatus::InvalidArgument, "rated_at out of range"), Ok)?;
        let merged = merge(&view.datasets).or_else(|e| fail(DlStatus::InvalidArgument, e))?;
        r.store.rate(id, value, at, &merged).map_err(rating_failure)
    })
}

/// Average rating over the rated elements of the selection. `has_value`
/// is set to false, and `out` left untouched, when none is rated.
///
/// # Safety
/// Handles live; `selection_json` NULL or NUL-terminated; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_average(
    ratings: *const DlRatings,
    view: *const DlView,
    selection_json: *const c_char,
    out: *mut f64,
    has_value: *mut bool,
) -> DlStatus {
    guard(|| {
        let r = handle(ratings, "ratings")?;
        let view = handle(view, "view")?;
        let sel = selection_arg(selection_json)?;
        if out.is_null() {
            return fail(DlStatus::NullArgument, "out is NULL");
        }
        let merged = merge(&view.datasets).or_else(|e| fail(DlStatus::InvalidArgument, e))?;
        let selected = apply_selection(&merged, &sel);
        let avg = r.store.average(selected.iter().map(|e| e.id.as_str()));
        if let Some(v) = avg {
            out.write(v);
        }
        put(has_value, avg.is_some(), "has_value")
    })
}

/// # Safety
/// `ratings` must be NULL or a handle not freed yet.
#[no_mangle]
pub unsafe extern "C" fn dl_ratings_free(ratings: *mut DlRatings) {
    if !ratings.is_null() {
        drop(Box::from_raw(ratings));
    }
}

/// Repairs UTF-8 text that was decoded as Latin-1.
///
/// # Safety
/// `text` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dl_repair_mojibake(text: *const c_char, out: *mut *mut c_char) -> DlStatus {
    guard(|| put_string(out, repair_mojibake(str_arg(text, "text")?)))
}

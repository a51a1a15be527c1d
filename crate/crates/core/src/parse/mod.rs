//! Per-service parsing of archive entries into data elements.

mod encoding;
pub mod rules;
pub mod template;
mod timestamp;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use encoding::{repair_mojibake, unwrap_js_export, WrapperError};
pub use rules::{Format, ParserRule, RuleBook, RuleError, RuleSet};
pub use timestamp::{parse_timestamp, TimeHint, EPOCH_MILLIS_THRESHOLD};

use crate::ingest::{build_file_elements, ExportArchive, IngestError, DEFAULT_MAX_ENTRY_BYTES};
use crate::model::{element_id, DataElement, Dataset, ModelError};
use template::RecordContext;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub path: String,
    pub message: String,
}

/// Outcome counters of one parse. `files_parsed + files_skipped` is the
/// number of files in the archive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub files_parsed: u64,
    pub files_skipped: u64,
    pub elements_emitted: u64,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub dataset_id: String,
    pub ingested_at: DateTime<Utc>,
    pub max_entry_bytes: u64,
}

impl ParseOptions {
    pub fn new(dataset_id: impl Into<String>, ingested_at: DateTime<Utc>) -> Self {
        ParseOptions {
            dataset_id: dataset_id.into(),
            ingested_at,
            max_entry_bytes: DEFAULT_MAX_ENTRY_BYTES,
        }
    }
}

struct FileOutcome {
    elements: Vec<DataElement>,
    warnings: Vec<String>,
}

fn decode_document(bytes: &[u8], format: Format) -> Result<Value, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8: {e}"))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}")),
        Format::JsWrappedJson => {
            let literal = unwrap_js_export(text).map_err(|e| e.to_string())?;
            serde_json::from_str(literal).map_err(|e| format!("invalid JSON: {e}"))
        }
        Format::Csv => csv_rows(text),
    }
}

/// CSV rows as JSON objects keyed by header, so rules address columns with
/// the same pointers as JSON fields.
fn csv_rows(text: &str) -> Result<Value, String> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| format!("invalid CSV: {e}"))?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format!("invalid CSV: {e}"))?;
        let row: serde_json::Map<String, Value> = headers
            .iter()
            .zip(record.iter())
            .map(|(h, v)| (h.to_owned(), Value::String(v.to_owned())))
            .collect();
        rows.push(Value::Object(row));
    }
    Ok(Value::Array(rows))
}

fn extract(doc: &Value, path: &str, service: &str, rule: &ParserRule, repair: bool) -> FileOutcome {
    let fix = |s: &str| if repair { repair_mojibake(s) } else { s.to_owned() };
    let mut warnings = Vec::new();
    if !rule.records.prefix_exists(doc) {
        warnings.push("records path not found in document".to_owned());
    }
    let mut elements = Vec::new();
    let (mut dropped, mut bad_times) = (0u64, 0u64);
    for ctx in rule.records.records(doc) {
        if !rule.require.iter().all(|r| present(r, &ctx)) {
            dropped += 1;
            continue;
        }
        let time = rule.time.as_ref().and_then(|r| {
            let raw = r.resolve(&ctx)?;
            let parsed = parse_timestamp(&raw, &rule.time_format);
            if parsed.is_none() {
                bad_times += 1;
            }
            parsed
        });
        let text = rule.text.render(&ctx, &fix);
        let subcategory = rule.subcategory.render(&ctx, &fix);
        let index = elements.len() as u64;
        elements.push(DataElement {
            id: element_id(service, path, index, &text),
            time,
            text,
            category: rule.category,
            subcategory,
            source_file: path.to_owned(),
            dataset_id: String::new(),
        });
    }
    if dropped > 0 {
        warnings.push(format!("{dropped} records lacked required fields and were dropped"));
    }
    if bad_times > 0 {
        warnings.push(format!("{bad_times} records have an unparseable time"));
    }
    FileOutcome { elements, warnings }
}

fn present(r: &template::Reference, ctx: &RecordContext<'_>) -> bool {
    r.resolve(ctx).is_some_and(|v| !v.is_null())
}

/// Parses every file of `archive` that a rule of `rules` claims. Files
/// without a rule, and files that fail to parse, stay without data
/// category; failures are reported as warnings and never abort the parse.
pub fn parse_export(
    archive: &ExportArchive,
    rules: &RuleSet,
    options: &ParseOptions,
) -> Result<(Dataset, ParseReport), ParseError> {
    let service = rules.service.as_str();
    let mut files = build_file_elements(archive.listing(), &options.dataset_id);

    let jobs: Vec<(usize, &ParserRule)> = files
        .iter()
        .enumerate()
        .filter_map(|(i, f)| rules.rule_for(&f.path()).map(|(_, r)| (i, r)))
        .collect();

    let outcomes: Vec<(usize, Result<FileOutcome, String>)> = jobs
        .par_iter()
        .map_init(
            || archive.clone(),
            |archive, &(i, rule)| {
                let path = files[i].path();
                let outcome = archive
                    .read_entry(&path, options.max_entry_bytes)
                    .map_err(|e| match e {
                        IngestError::EntryTooLarge { size, cap, .. } => {
                            format!("{size} bytes exceeds the {cap} byte parse cap")
                        }
                        other => other.to_string(),
                    })
                    .and_then(|bytes| decode_document(&bytes, rule.format))
                    .map(|doc| extract(&doc, &path, service, rule, rules.repair_mojibake));
                (i, outcome)
            },
        )
        .collect();

    let mut report = ParseReport::default();
    let mut elements = Vec::new();
    for (i, outcome) in outcomes {
        let path = files[i].path();
        match outcome {
            Ok(out) => {
                report.files_parsed += 1;
                report.elements_emitted += out.elements.len() as u64;
                let file = &mut files[i];
                file.element_count = out.elements.len() as u64;
                file.data_category = out.elements.first().map(|e| e.category);
                report
                    .warnings
                    .extend(out.warnings.into_iter().map(|message| ParseWarning {
                        path: path.clone(),
                        message,
                    }));
                elements.extend(out.elements);
            }
            Err(message) => {
                report.files_skipped += 1;
                report.warnings.push(ParseWarning { path, message });
            }
        }
    }
    report.files_skipped += (files.len() - jobs.len()) as u64;

    let dataset = Dataset::new(
        options.dataset_id.clone(),
        service,
        options.ingested_at,
        files,
        elements,
    )?;
    Ok((dataset, report))
}

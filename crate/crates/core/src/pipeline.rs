//! Archive bytes to dataset in one call: detect (or take) the service, pick
//! its rules, parse.

use chrono::{DateTime, Utc};

use crate::ingest::{detect_service, ExportArchive, SignatureTable, DEFAULT_MAX_ENTRY_BYTES};
use crate::model::Dataset;
use crate::parse::{parse_export, ParseError, ParseOptions, ParseReport, RuleBook};

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub signatures: SignatureTable,
    pub rules: RuleBook,
    pub max_entry_bytes: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            signatures: SignatureTable::builtin(),
            rules: RuleBook::builtin(),
            max_entry_bytes: DEFAULT_MAX_ENTRY_BYTES,
        }
    }
}

/// Per-archive choices; `None` fields fall back to derived defaults.
#[derive(Debug, Clone, Default)]
pub struct IngestRequest {
    /// Skip detection and parse with this service's rules.
    pub service: Option<String>,
    /// Defaults to `<service>-<first 12 hex digits of the archive SHA-256>`.
    pub dataset_id: Option<String>,
    /// Defaults to the newest entry timestamp in the archive, so that
    /// ingesting the same bytes twice gives the same document.
    pub ingested_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub report: ParseReport,
    /// False when the service came from the request.
    pub detected: bool,
}

pub fn default_dataset_id(service: &str, archive: &ExportArchive) -> String {
    format!("{service}-{}", &archive.digest()[..12])
}

pub fn ingest_archive(
    archive: &ExportArchive,
    request: &IngestRequest,
    config: &IngestConfig,
) -> Result<Ingested, ParseError> {
    let (service, detected) = match &request.service {
        Some(s) => (s.clone(), false),
        None => (detect_service(archive.listing(), &config.signatures)?, true),
    };
    let rules = config.rules.get(&service)?;
    let dataset_id = request
        .dataset_id
        .clone()
        .unwrap_or_else(|| default_dataset_id(&service, archive));
    let ingested_at = request
        .ingested_at
        .or_else(|| archive.newest_entry_time())
        .unwrap_or(DateTime::UNIX_EPOCH);
    let mut options = ParseOptions::new(dataset_id, ingested_at);
    options.max_entry_bytes = config.max_entry_bytes;
    let (dataset, report) = parse_export(archive, rules, &options)?;
    Ok(Ingested {
        dataset,
        report,
        detected,
    })
}

//! Export archive access: listing zip entries, detecting the originating
//! service from its path layout, and building file elements.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use globset::{Glob, GlobBuilder, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zip::result::ZipError;
use zip::ZipArchive;

use crate::model::FileElement;

/// Entries above this size are listed but never read into memory.
pub const DEFAULT_MAX_ENTRY_BYTES: u64 = 512 * 1024 * 1024;

const DEFAULT_SIGNATURES: &str = include_str!("../rules/signatures.toml");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("corrupt or unsupported archive: {0}")]
    Format(String),
    #[error("archive entry {path:?} escapes the archive root")]
    PathTraversal { path: String },
    #[error("no service signature matches this archive")]
    UnknownService,
    #[error("archive is empty")]
    EmptyListing,
    #[error("archive entry {0:?} not found")]
    MissingEntry(String),
    #[error("archive entry {path:?} is {size} bytes, above the {cap} byte cap")]
    EntryTooLarge { path: String, size: u64, cap: u64 },
    #[error("invalid signature table: {0}")]
    Signatures(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ZipError> for IngestError {
    fn from(e: ZipError) -> Self {
        match e {
            ZipError::Io(io) => IngestError::Format(io.to_string()),
            other => IngestError::Format(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchiveEntry {
    pub path: String,
    pub size_bytes: u64,
    pub is_dir: bool,
}

/// Stored files of an archive in archive order, directory entries removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchiveListing {
    pub archive_name: String,
    pub entries: Vec<ArchiveEntry>,
}

impl ArchiveListing {
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }
}

fn zip_time(t: zip::DateTime) -> Option<DateTime<Utc>> {
    let date = NaiveDate::from_ymd_opt(t.year().into(), t.month().into(), t.day().into())?;
    let time = date.and_hms_opt(t.hour().into(), t.minute().into(), t.second().into())?;
    Some(time.and_utc())
}

/// Normalizes an entry name to forward slashes, rejecting anything that
/// could resolve outside the archive root.
fn normalize_entry_path(raw: &str) -> Result<String, IngestError> {
    let path = raw.replace('\\', "/");
    let traversal = path.starts_with('/')
        || path.split('/').any(|c| c == "..")
        || path.split('/').next().is_some_and(|c| c.len() == 2 && c.ends_with(':'));
    if traversal {
        return Err(IngestError::PathTraversal { path: raw.to_owned() });
    }
    Ok(path)
}

/// An opened export archive. Cloning is cheap and clones may read entries
/// from different threads.
#[derive(Clone)]
pub struct ExportArchive {
    zip: ZipArchive<Cursor<Arc<[u8]>>>,
    listing: ArchiveListing,
    /// listing path -> zip index
    index: BTreeMap<String, usize>,
    newest_entry: Option<DateTime<Utc>>,
}

impl std::fmt::Debug for ExportArchive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExportArchive").field("listing", &self.listing).finish()
    }
}

impl ExportArchive {
    pub fn open(archive_name: impl Into<String>, bytes: impl Into<Arc<[u8]>>) -> Result<Self, IngestError> {
        let mut zip = ZipArchive::new(Cursor::new(bytes.into()))?;
        let mut entries = Vec::with_capacity(zip.len());
        let mut index = BTreeMap::new();
        let mut newest_entry = None;
        for i in 0..zip.len() {
            let file = zip.by_index_raw(i)?;
            let path = normalize_entry_path(file.name())?;
            if file.is_dir() || path.ends_with('/') {
                continue;
            }
            newest_entry = newest_entry.max(file.last_modified().and_then(zip_time));
            if index.insert(path.clone(), i).is_some() {
                return Err(IngestError::Format(format!("duplicate entry {path:?}")));
            }
            entries.push(ArchiveEntry {
                path,
                size_bytes: file.size(),
                is_dir: false,
            });
        }
        Ok(ExportArchive {
            zip,
            listing: ArchiveListing {
                archive_name: archive_name.into(),
                entries,
            },
            index,
            newest_entry,
        })
    }

    pub fn open_path(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::open(name, bytes)
    }

    pub fn listing(&self) -> &ArchiveListing {
        &self.listing
    }

    /// Latest modification time recorded on any file entry.
    pub fn newest_entry_time(&self) -> Option<DateTime<Utc>> {
        self.newest_entry
    }

    /// SHA-256 of the whole archive, lowercase hex.
    pub fn digest(&self) -> String {
        let bytes = self.zip.clone().into_inner().into_inner();
        hex::encode(Sha256::digest(&bytes))
    }

    /// Reads one entry fully, refusing entries above `cap` bytes.
    pub fn read_entry(&mut self, path: &str, cap: u64) -> Result<Vec<u8>, IngestError> {
        let &i = self
            .index
            .get(path)
            .ok_or_else(|| IngestError::MissingEntry(path.to_owned()))?;
        let file = self.zip.by_index(i)?;
        let size = file.size();
        if size > cap {
            return Err(IngestError::EntryTooLarge {
                path: path.to_owned(),
                size,
                cap,
            });
        }
        let mut buf = Vec::with_capacity(size as usize);
        file.take(cap.saturating_add(1)).read_to_end(&mut buf)?;
        if buf.len() as u64 > cap {
            return Err(IngestError::EntryTooLarge {
                path: path.to_owned(),
                size: buf.len() as u64,
                cap,
            });
        }
        Ok(buf)
    }
}

/// Lists the stored files of a zip archive.
pub fn list_archive(bytes: &[u8]) -> Result<ArchiveListing, IngestError> {
    ExportArchive::open("", bytes.to_vec()).map(|a| a.listing)
}

/// Builds one file element per listed entry. Data categories and counts
/// stay empty until a parser fills them.
pub fn build_file_elements(listing: &ArchiveListing, dataset_id: &str) -> Vec<FileElement> {
    listing
        .entries
        .iter()
        .filter(|e| !e.is_dir)
        .map(|e| FileElement::new(dataset_id, &e.path, e.size_bytes))
        .collect()
}

fn compile_glob(pattern: &str) -> Result<Glob, IngestError> {
    GlobBuilder::new(pattern)
        .literal_separator(true)
        .build()
        .map_err(|e| IngestError::Signatures(format!("bad glob {pattern:?}: {e}")))
}

/// Path patterns identifying one service's export layout.
#[derive(Debug, Clone)]
pub struct ServiceSignature {
    pub service: String,
    pub required_globs: Vec<String>,
    pub forbidden_globs: Vec<String>,
    pub priority: i64,
    required: Vec<globset::GlobMatcher>,
    forbidden: GlobSet,
}

impl ServiceSignature {
    pub fn new(
        service: impl Into<String>,
        required_globs: Vec<String>,
        forbidden_globs: Vec<String>,
        priority: i64,
    ) -> Result<Self, IngestError> {
        let service = service.into();
        if required_globs.is_empty() {
            return Err(IngestError::Signatures(format!(
                "signature {service:?} needs at least one required glob"
            )));
        }
        let required = required_globs
            .iter()
            .map(|g| compile_glob(g).map(|g| g.compile_matcher()))
            .collect::<Result<_, _>>()?;
        let mut forbidden = GlobSetBuilder::new();
        for g in &forbidden_globs {
            forbidden.add(compile_glob(g)?);
        }
        let forbidden = forbidden.build().map_err(|e| IngestError::Signatures(e.to_string()))?;
        Ok(ServiceSignature {
            service,
            required_globs,
            forbidden_globs,
            priority,
            required,
            forbidden,
        })
    }

    pub fn matches(&self, listing: &ArchiveListing) -> bool {
        self.required.iter().all(|m| listing.paths().any(|p| m.is_match(p)))
            && !listing.paths().any(|p| self.forbidden.is_match(p))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureFile {
    version: u32,
    #[serde(default, rename = "service")]
    services: Vec<SignatureEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureEntry {
    name: String,
    required: Vec<String>,
    #[serde(default)]
    forbidden: Vec<String>,
    #[serde(default)]
    priority: i64,
}

/// Ordered signature table used by [`detect_service`].
#[derive(Debug, Clone)]
pub struct SignatureTable {
    signatures: Vec<ServiceSignature>,
}

impl SignatureTable {
    /// The table shipped for Facebook, Google, Twitter and Instagram.
    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_SIGNATURES).expect("builtin signature table is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let file: SignatureFile = toml::from_str(text).map_err(|e| IngestError::Signatures(e.to_string()))?;
        if file.version != 1 {
            return Err(IngestError::Signatures(format!(
                "unsupported signature file version {}",
                file.version
            )));
        }
        let signatures = file
            .services
            .into_iter()
            .map(|e| ServiceSignature::new(e.name, e.required, e.forbidden, e.priority))
            .collect::<Result<_, _>>()?;
        Ok(SignatureTable { signatures })
    }

    /// Builtin table with entries from `text` replacing same-named services
    /// and appending new ones.
    pub fn builtin_extended_with(text: &str) -> Result<Self, IngestError> {
        let mut table = Self::builtin();
        for sig in Self::from_toml(text)?.signatures {
            match table.signatures.iter_mut().find(|s| s.service == sig.service) {
                Some(slot) => *slot = sig,
                None => table.signatures.push(sig),
            }
        }
        Ok(table)
    }

    pub fn signatures(&self) -> &[ServiceSignature] {
        &self.signatures
    }

    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.signatures.iter().map(|s| s.service.as_str())
    }
}

impl From<Vec<ServiceSignature>> for SignatureTable {
    fn from(signatures: Vec<ServiceSignature>) -> Self {
        SignatureTable { signatures }
    }
}

/// Picks the highest-priority matching signature. Ties go to the
/// lexicographically smallest service name so the answer depends only on
/// the set of entry paths.
pub fn detect_service(listing: &ArchiveListing, table: &SignatureTable) -> Result<String, IngestError> {
    if listing.entries.is_empty() {
        return Err(IngestError::EmptyListing);
    }
    table
        .signatures
        .iter()
        .filter(|s| s.matches(listing))
        .min_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.service.cmp(&b.service)))
        .map(|s| s.service.clone())
        .ok_or(IngestError::UnknownService)
}

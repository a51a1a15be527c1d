//! The unification scheme shared by every service: file elements, data
//! elements, the closed category set, and the canonical unified-export
//! document.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current version of the unified-export document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("malformed unified document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Data category of a data element. The declaration order is the display
/// and color order used by every view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Account,
    Activity,
    Contacts,
    Location,
    Media,
    Messages,
    PostsAndComments,
    Security,
    Search,
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Account,
        Category::Activity,
        Category::Contacts,
        Category::Location,
        Category::Media,
        Category::Messages,
        Category::PostsAndComments,
        Category::Security,
        Category::Search,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Account => "Account",
            Category::Activity => "Activity",
            Category::Contacts => "Contacts",
            Category::Location => "Location",
            Category::Media => "Media",
            Category::Messages => "Messages",
            Category::PostsAndComments => "PostsAndComments",
            Category::Security => "Security",
            Category::Search => "Search",
            Category::Other => "Other",
        }
    }

    /// Human-readable label, e.g. "Posts and Comments".
    pub fn label(self) -> &'static str {
        match self {
            Category::PostsAndComments => "Posts and Comments",
            other => other.as_str(),
        }
    }

    /// Fill color shared by the CLI renderings and the UI.
    pub fn color(self) -> Color {
        Color(match self {
            Category::Account => "#1f78b4",
            Category::Activity => "#33a02c",
            Category::Contacts => "#6a3d9a",
            Category::Location => "#ff7f00",
            Category::Media => "#b15928",
            Category::Messages => "#e7298a",
            Category::PostsAndComments => "#fdbf6f",
            Category::Security => "#e31a1c",
            Category::Search => "#a6cee3",
            Category::Other => "#999999",
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = ModelError;

    /// Accepts the canonical name or the label, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(&wanted))
            .ok_or_else(|| ModelError::validation("category", format!("unknown category {s:?}")))
    }
}

/// A CSS hex color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Color(pub &'static str);

/// Color of files that carry no data elements.
pub const WHITE: Color = Color("#ffffff");

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Coarse file type, derived from the file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FileCategory {
    Picture,
    Video,
    Audio,
    Text,
    Document,
    Other,
}

impl FileCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FileCategory::Picture => "Picture",
            FileCategory::Video => "Video",
            FileCategory::Audio => "Audio",
            FileCategory::Text => "Text",
            FileCategory::Document => "Document",
            FileCategory::Other => "Other",
        }
    }
}

impl fmt::Display for FileCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const PICTURE_EXT: &[&str] = &["jpg", "jpeg", "png", "gif", "webp", "bmp", "svg"];
const VIDEO_EXT: &[&str] = &["mp4", "mov", "avi", "webm", "mkv"];
const AUDIO_EXT: &[&str] = &["mp3", "wav", "ogg", "m4a", "aac"];
const TEXT_EXT: &[&str] = &["json", "js", "csv", "txt", "vcf", "ics", "xml"];
const DOCUMENT_EXT: &[&str] = &["html", "pdf", "doc", "docx"];

/// Classifies a file by its (case-folded) extension.
pub fn classify_file(file_name: &str) -> FileCategory {
    let ext = match file_name.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() => ext.to_ascii_lowercase(),
        _ => return FileCategory::Other,
    };
    let tables: [(&[&str], FileCategory); 5] = [
        (PICTURE_EXT, FileCategory::Picture),
        (VIDEO_EXT, FileCategory::Video),
        (AUDIO_EXT, FileCategory::Audio),
        (TEXT_EXT, FileCategory::Text),
        (DOCUMENT_EXT, FileCategory::Document),
    ];
    tables
        .iter()
        .find(|(exts, _)| exts.contains(&ext.as_str()))
        .map_or(FileCategory::Other, |(_, cat)| *cat)
}

/// Stable identifier of a data element: SHA-256 over the length-prefixed
/// service, source path, ordinal and text, as 64 lowercase hex digits.
pub fn element_id(service: &str, source_path: &str, index: u64, text: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [service.as_bytes(), source_path.as_bytes()] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.update(index.to_le_bytes());
    hasher.update((text.len() as u64).to_le_bytes());
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Splits an archive path into `(folder, file_name)`; the folder keeps its
/// trailing slash and is empty for top-level files.
pub fn split_path(path: &str) -> (&str, &str) {
    match path.rfind('/') {
        Some(i) => (&path[..=i], &path[i + 1..]),
        None => ("", path),
    }
}

/// One file contained in an export archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileElement {
    #[serde(rename = "name")]
    pub file_name: String,
    pub folder: String,
    pub size_bytes: u64,
    pub file_category: FileCategory,
    pub data_category: Option<Category>,
    pub element_count: u64,
    #[serde(skip)]
    pub dataset_id: String,
}

impl FileElement {
    pub fn new(dataset_id: &str, path: &str, size_bytes: u64) -> Self {
        let (folder, file_name) = split_path(path);
        FileElement {
            file_name: file_name.to_owned(),
            folder: folder.to_owned(),
            size_bytes,
            file_category: classify_file(file_name),
            data_category: None,
            element_count: 0,
            dataset_id: dataset_id.to_owned(),
        }
    }

    /// Folder and name joined; unique within a dataset.
    pub fn path(&self) -> String {
        format!("{}{}", self.folder, self.file_name)
    }
}

/// One record parsed out of a machine-readable file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataElement {
    pub id: String,
    #[serde(with = "utc_seconds_opt")]
    pub time: Option<DateTime<Utc>>,
    pub text: String,
    pub category: Category,
    pub subcategory: String,
    /// Archive path (`folder` + `name`) of the owning file.
    pub source_file: String,
    #[serde(skip)]
    pub dataset_id: String,
}

/// Orders elements by time (nulls last), then id.
pub fn element_order(a: &DataElement, b: &DataElement) -> std::cmp::Ordering {
    match (a.time, b.time) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
    .then_with(|| a.id.cmp(&b.id))
}

/// All elements parsed from one service's export archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub dataset_id: String,
    pub service: String,
    pub ingested_at: DateTime<Utc>,
    files: Vec<FileElement>,
    elements: Vec<DataElement>,
    time_extent: Option<(DateTime<Utc>, DateTime<Utc>)>,
}

impl Dataset {
    /// Builds a dataset, putting files and elements into canonical order and
    /// checking every invariant of the scheme.
    pub fn new(
        dataset_id: impl Into<String>,
        service: impl Into<String>,
        ingested_at: DateTime<Utc>,
        mut files: Vec<FileElement>,
        mut elements: Vec<DataElement>,
    ) -> Result<Self, ModelError> {
        let dataset_id = dataset_id.into();
        let service = service.into();
        if dataset_id.is_empty() {
            return Err(ModelError::validation("dataset_id", "must not be empty"));
        }
        if service.is_empty() {
            return Err(ModelError::validation("service", "must not be empty"));
        }
        if ingested_at.nanosecond() != 0 {
            return Err(ModelError::validation("ingested_at", "must have second precision"));
        }
        for f in &mut files {
            f.dataset_id.clone_from(&dataset_id);
        }
        for e in &mut elements {
            e.dataset_id.clone_from(&dataset_id);
        }
        files.sort_by(|a, b| (&a.folder, &a.file_name).cmp(&(&b.folder, &b.file_name)));
        elements.sort_by(element_order);
        validate(&files, &elements)?;
        let time_extent = elements.iter().filter_map(|e| e.time).fold(
            None,
            |acc: Option<(DateTime<Utc>, DateTime<Utc>)>, t| match acc {
                None => Some((t, t)),
                Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
            },
        );
        Ok(Dataset {
            dataset_id,
            service,
            ingested_at,
            files,
            elements,
            time_extent,
        })
    }

    pub fn files(&self) -> &[FileElement] {
        &self.files
    }

    pub fn elements(&self) -> &[DataElement] {
        &self.elements
    }

    pub fn time_extent(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        self.time_extent
    }

    pub fn file(&self, path: &str) -> Option<&FileElement> {
        let (folder, name) = split_path(path);
        self.files
            .binary_search_by(|f| (f.folder.as_str(), f.file_name.as_str()).cmp(&(folder, name)))
            .ok()
            .map(|i| &self.files[i])
    }

    /// Element counts per category, zeros included.
    pub fn category_counts(&self) -> BTreeMap<Category, u64> {
        let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        for e in &self.elements {
            *counts.entry(e.category).or_default() += 1;
        }
        counts
    }
}

fn validate(files: &[FileElement], elements: &[DataElement]) -> Result<(), ModelError> {
    let mut by_path: HashMap<String, &FileElement> = HashMap::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        if f.file_name.is_empty() {
            return Err(ModelError::validation(format!("files[{i}].name"), "must not be empty"));
        }
        if !(f.folder.is_empty() || f.folder.ends_with('/')) {
            return Err(ModelError::validation(
                format!("files[{i}].folder"),
                "must be empty or end with '/'",
            ));
        }
        if f.data_category.is_some() != (f.element_count > 0) {
            return Err(ModelError::validation(
                format!("files[{i}].data_category"),
                "must be present exactly when element_count > 0",
            ));
        }
        if by_path.insert(f.path(), f).is_some() {
            return Err(ModelError::validation(
                format!("files[{i}]"),
                format!("duplicate path {:?}", f.path()),
            ));
        }
    }

    let mut counted: HashMap<&str, u64> = HashMap::new();
    let mut ids = HashSet::with_capacity(elements.len());
    for (i, e) in elements.iter().enumerate() {
        if !ids.insert(e.id.as_str()) {
            return Err(ModelError::validation(format!("elements[{i}].id"), "duplicate id"));
        }
        if let Some(t) = e.time {
            if t.nanosecond() != 0 {
                return Err(ModelError::validation(
                    format!("elements[{i}].time"),
                    "must have second precision",
                ));
            }
        }
        let Some(file) = by_path.get(e.source_file.as_str()) else {
            return Err(ModelError::validation(
                format!("elements[{i}].source_file"),
                format!("no file {:?} in dataset", e.source_file),
            ));
        };
        if file.data_category != Some(e.category) {
            return Err(ModelError::validation(
                format!("elements[{i}].category"),
                "differs from the data_category of its source file",
            ));
        }
        *counted.entry(e.source_file.as_str()).or_default() += 1;
    }

    for (i, f) in files.iter().enumerate() {
        let n = counted.get(f.path().as_str()).copied().unwrap_or(0);
        if n != f.element_count {
            return Err(ModelError::validation(
                format!("files[{i}].element_count"),
                format!("is {} but {n} elements reference the file", f.element_count),
            ));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: u32,
    service: &'a str,
    dataset_id: &'a str,
    #[serde(with = "utc_seconds")]
    ingested_at: DateTime<Utc>,
    files: &'a [FileElement],
    elements: &'a [DataElement],
}

#[derive(Deserialize)]
struct DocumentIn {
    schema_version: u64,
    service: String,
    dataset_id: String,
    #[serde(with = "utc_seconds")]
    ingested_at: DateTime<Utc>,
    files: Vec<FileElement>,
    elements: Vec<DataElement>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u64>,
}

/// Serializes the canonical unified-export document (compact, keys in
/// schema order).
pub fn write_unified<W: Write>(dataset: &Dataset, mut destination: W) -> Result<(), ModelError> {
    let doc = DocumentOut {
        schema_version: SCHEMA_VERSION,
        service: &dataset.service,
        dataset_id: &dataset.dataset_id,
        ingested_at: dataset.ingested_at,
        files: &dataset.files,
        elements: &dataset.elements,
    };
    serde_json::to_writer(&mut destination, &doc)?;
    destination.flush()?;
    Ok(())
}

pub fn to_unified_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_unified(dataset, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses and validates a unified-export document.
pub fn read_unified<R: Read>(mut source: R) -> Result<Dataset, ModelError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    from_unified_str(&text)
}

pub fn from_unified_str(text: &str) -> Result<Dataset, ModelError> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    match probe.schema_version {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(ModelError::UnsupportedVersion { found }),
        None => return Err(ModelError::validation("schema_version", "missing")),
    }
    let doc: DocumentIn = serde_json::from_str(text)?;
    debug_assert_eq!(doc.schema_version, u64::from(SCHEMA_VERSION));
    Dataset::new(doc.dataset_id, doc.service, doc.ingested_at, doc.files, doc.elements)
}

/// RFC 3339 with a `Z` suffix and whole seconds, e.g. `2019-01-01T12:34:56Z`.
pub fn format_utc(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn parse_utc(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("invalid RFC 3339 timestamp {s:?}: {e}"))
}

mod utc_seconds {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_utc(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_utc(&s).map_err(serde::de::Error::custom)
    }
}

mod utc_seconds_opt {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&super::format_utc(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| super::parse_utc(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

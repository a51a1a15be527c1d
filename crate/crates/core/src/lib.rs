//! Local-first ingestion and exploration of GDPR data-export archives.
//!
//! Export archives from several services are parsed by declarative
//! per-service rules into one unified scheme ([`model`]): file elements for
//! every file in the archive and data elements for every record found in a
//! machine-readable file, each assigned to one of ten [`Category`]s. The
//! query engine, treemap layout and sensitivity store operate on that
//! scheme only.

pub mod fixture;
pub mod ingest;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod query;
pub mod ratings;
pub mod render;
pub mod treemap;

pub use ingest::{detect_service, list_archive, ExportArchive, IngestError, SignatureTable};
pub use model::{
    from_unified_str, read_unified, to_unified_string, write_unified, Category, DataElement, Dataset, FileCategory,
    FileElement, ModelError,
};
pub use parse::{parse_export, ParseError, ParseOptions, ParseReport, RuleBook};
pub use pipeline::{ingest_archive, IngestConfig, IngestRequest, Ingested};
pub use query::{apply_selection, compute_stats, merge, MergedView, Selection, Stats};
pub use ratings::{RatingError, RatingStore};
pub use treemap::{layout, LayoutError, Scale};

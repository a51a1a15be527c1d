//! `datalens` command-line frontend.
//!
//! Exit codes: 0 success, 1 input error, 2 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use datalens::{Category, Scale};

#[derive(Debug, Parser)]
#[command(name = "datalens", version, about = "Explore GDPR data-export archives locally")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML file with extra or replacement service signatures
    #[arg(long, global = true, env = "DATALENS_SIGNATURES", value_name = "FILE")]
    pub signatures: Option<PathBuf>,
    /// Directory of TOML rule tables replacing builtin ones per service
    #[arg(long, global = true, env = "DATALENS_RULES", value_name = "DIR")]
    pub rules: Option<PathBuf>,
    /// Ratings file used by `rate` and `average`
    #[arg(long, global = true, env = "DATALENS_RATINGS", value_name = "FILE")]
    pub ratings: Option<PathBuf>,
    /// Offset applied to times in reports, e.g. +02:00
    #[arg(
        long,
        global = true,
        value_name = "OFFSET",
        default_value = "+00:00",
        allow_hyphen_values = true
    )]
    pub tz_offset: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse export archives into unified documents
    Ingest(IngestArgs),
    /// Print which service produced an archive
    Detect { archive: PathBuf },
    /// List the file elements of an archive
    List {
        archive: PathBuf,
        #[arg(long, value_enum, default_value_t = TableOrJson::Table)]
        format: TableOrJson,
    },
    /// Counts per category, service and file
    Stats(StatsArgs),
    /// Render the file treemap
    Treemap(TreemapArgs),
    /// Render the date x time-of-day timeline
    Timeline(TimelineArgs),
    /// Generate a synthetic export archive and its manifest
    Fixture(FixtureArgs),
    /// Rate the perceived sensitivity of one data element
    Rate(RateArgs),
    /// Average sensitivity over the rated elements of a selection
    Average(AverageArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableOrJson {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SvgOrJson {
    Svg,
    Json,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(required = true)]
    pub archives: Vec<PathBuf>,
    /// Where to write `<archive stem>.unified.json`
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Skip detection and parse with this service's rules
    #[arg(long)]
    pub service: Option<String>,
    /// Dataset id (only with a single archive)
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// Ingestion timestamp recorded in the document (RFC 3339)
    #[arg(long)]
    pub ingested_at: Option<String>,
    /// Print every parse warning
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args, Default)]
pub struct SelectionArgs {
    /// Keep only this dataset (repeatable)
    #[arg(long = "dataset", value_name = "ID")]
    pub datasets: Vec<String>,
    /// Keep only this category (repeatable)
    #[arg(long = "category", value_name = "CATEGORY", value_parser = parse_category)]
    pub categories: Vec<Category>,
    /// Earliest time, RFC 3339 or YYYY-MM-DD
    #[arg(long)]
    pub since: Option<String>,
    /// Latest time, RFC 3339 or YYYY-MM-DD (whole day)
    #[arg(long)]
    pub until: Option<String>,
    /// Case-insensitive substring of text or subcategory
    #[arg(short, long)]
    pub query: Option<String>,
}

fn parse_category(s: &str) -> Result<Category, String> {
    s.parse().map_err(|e: datalens::ModelError| e.to_string())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(required = true)]
    pub documents: Vec<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[arg(long, value_enum, default_value_t = TableOrJson::Table)]
    pub format: TableOrJson,
}

#[derive(Debug, Args)]
pub struct TreemapArgs {
    #[arg(required = true)]
    pub documents: Vec<PathBuf>,
    /// Keep only files of this dataset (repeatable)
    #[arg(long = "dataset", value_name = "ID")]
    pub datasets: Vec<String>,
    #[arg(long, default_value = "size", value_parser = parse_scale)]
    pub scale: Scale,
    #[arg(long, default_value_t = 960.0)]
    pub width: f64,
    #[arg(long, default_value_t = 600.0)]
    pub height: f64,
    #[arg(long, value_enum, default_value_t = SvgOrJson::Svg)]
    pub format: SvgOrJson,
    /// Output file; stdout when absent
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_scale(s: &str) -> Result<Scale, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    #[arg(required = true)]
    pub documents: Vec<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// First day on the axis (YYYY-MM-DD)
    #[arg(long)]
    pub from: Option<String>,
    /// Last day on the axis (YYYY-MM-DD)
    #[arg(long)]
    pub to: Option<String>,
    /// One stacked panel per dataset
    #[arg(long)]
    pub split_by_dataset: bool,
    #[arg(long, default_value_t = 960.0)]
    pub width: f64,
    #[arg(long, default_value_t = 240.0)]
    pub panel_height: f64,
    #[arg(long, value_enum, default_value_t = SvgOrJson::Svg)]
    pub format: SvgOrJson,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Scenario preset: use-case-1 or use-case-2
    #[arg(long, conflicts_with_all = ["spec", "random"])]
    pub preset: Option<String>,
    /// JSON fixture spec file
    #[arg(long, conflicts_with = "random")]
    pub spec: Option<PathBuf>,
    /// Draw every volume from the seed
    #[arg(long)]
    pub random: bool,
    #[arg(long, default_value = "facebook")]
    pub service: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 2012)]
    pub from_year: i32,
    #[arg(long, default_value_t = 2019)]
    pub to_year: i32,
    #[arg(long)]
    pub owner: Option<String>,
    #[command(flatten)]
    pub volume: VolumeArgs,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Base name of the written files
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long, default_value_t = 5)]
    pub conversations: u32,
    #[arg(long, default_value_t = 50)]
    pub messages_per_conversation: u32,
    #[arg(long, default_value_t = 50)]
    pub posts: u32,
    #[arg(long, default_value_t = 30)]
    pub logins: u32,
    #[arg(long, default_value_t = 200)]
    pub locations: u32,
    #[arg(long, default_value_t = 40)]
    pub searches: u32,
    #[arg(long, default_value_t = 10)]
    pub media_files: u32,
    #[arg(long, default_value_t = 50)]
    pub contacts: u32,
    #[arg(long, default_value_t = 100)]
    pub activities: u32,
    #[arg(long, default_value_t = 5)]
    pub account_events: u32,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Unified documents holding the element
    #[arg(required = true)]
    pub documents: Vec<PathBuf>,
    #[arg(long)]
    pub element: String,
    /// 0 = not very sensitive, 1 = very sensitive
    #[arg(long)]
    pub value: f64,
    /// Rating time (RFC 3339); now when absent
    #[arg(long)]
    pub at: Option<String>,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(required = true)]
    pub documents: Vec<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("datalens: {failure}");
            ExitCode::from(failure.code())
        }
        Err(_) => ExitCode::from(2),
    }
}

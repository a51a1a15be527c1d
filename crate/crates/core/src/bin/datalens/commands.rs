use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, Utc};
use rayon::prelude::*;

use datalens::fixture::{self, FixtureSpec, TimeSpan, Volume};
use datalens::ingest::IngestError;
use datalens::parse::ParseError;
use datalens::query::{partition_by_dataset, TimeRange};
use datalens::render::{self, TimelineOptions, TimelinePanel};
use datalens::treemap::{nodes_for, LayoutError};
use datalens::{
    apply_selection, compute_stats, ingest_archive, layout, list_archive, merge, read_unified, write_unified, Dataset,
    ExportArchive, IngestConfig, IngestRequest, RatingStore, RuleBook, Selection, SignatureTable,
};

use crate::{
    AverageArgs, Cli, Command, FixtureArgs, Global, IngestArgs, RateArgs, SelectionArgs, StatsArgs, SvgOrJson,
    TableOrJson, TimelineArgs, TreemapArgs,
};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

fn input(m: impl fmt::Display) -> Failure {
    Failure::Input(m.to_string())
}

fn internal(m: impl fmt::Display) -> Failure {
    Failure::Internal(m.to_string())
}

type Result<T> = std::result::Result<T, Failure>;

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest(a) => ingest(g, a),
        Command::Detect { archive } => detect(g, &archive),
        Command::List { archive, format } => list(&archive, format),
        Command::Stats(a) => stats(g, a),
        Command::Treemap(a) => treemap(a),
        Command::Timeline(a) => timeline(g, a),
        Command::Fixture(a) => fixture_cmd(a),
        Command::Rate(a) => rate(g, a),
        Command::Average(a) => average(g, a),
    }
}

fn signatures(g: &Global) -> Result<SignatureTable> {
    match &g.signatures {
        None => Ok(SignatureTable::builtin()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            SignatureTable::builtin_extended_with(&text).map_err(|e| input(format!("{}: {e}", p.display())))
        }
    }
}

fn rules(g: &Global) -> Result<RuleBook> {
    match &g.rules {
        None => Ok(RuleBook::builtin()),
        Some(dir) => RuleBook::builtin()
            .with_overrides_from_dir(dir)
            .map_err(|e| input(format!("{}: {e}", dir.display()))),
    }
}

fn tz_offset(g: &Global) -> Result<FixedOffset> {
    let s = g.tz_offset.trim();
    if s.eq_ignore_ascii_case("z") || s.eq_ignore_ascii_case("utc") || s == "0" {
        return Ok(FixedOffset::east_opt(0).expect("zero offset"));
    }
    s.parse::<FixedOffset>()
        .map_err(|_| input(format!("--tz-offset {s:?}: expected an offset like +02:00 or -05:30")))
}

fn parse_rfc3339(s: &str, what: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| input(format!("{what} {s:?}: {e}")))
}

fn parse_date(s: &str, what: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| input(format!("{what} {s:?}: expected YYYY-MM-DD ({e})")))
}

/// Start (or end) of a local calendar day as UTC.
fn day_bound(d: NaiveDate, end: bool, offset: FixedOffset) -> DateTime<Utc> {
    let time = if end {
        NaiveTime::from_hms_opt(23, 59, 59).expect("valid time")
    } else {
        NaiveTime::MIN
    };
    let local = d.and_time(time).and_utc();
    local - chrono::Duration::seconds(offset.local_minus_utc().into())
}

fn time_bound(s: &str, end: bool, offset: FixedOffset, what: &str) -> Result<DateTime<Utc>> {
    if s.len() == 10 {
        Ok(day_bound(parse_date(s, what)?, end, offset))
    } else {
        parse_rfc3339(s, what)
    }
}

fn selection(a: &SelectionArgs, offset: FixedOffset) -> Result<Selection> {
    let since = a
        .since
        .as_deref()
        .map(|s| time_bound(s, false, offset, "--since"))
        .transpose()?;
    let until = a
        .until
        .as_deref()
        .map(|s| time_bound(s, true, offset, "--until"))
        .transpose()?;
    let time_range = match (since, until) {
        (None, None) => None,
        (start, end) => Some(TimeRange {
            start: start.unwrap_or(DateTime::<Utc>::MIN_UTC),
            end: end.unwrap_or(DateTime::<Utc>::MAX_UTC),
        }),
    };
    let sel = Selection {
        dataset_ids: a.datasets.iter().cloned().collect(),
        categories: a.categories.iter().copied().collect(),
        time_range,
        query: a.query.clone(),
    };
    sel.validate().map_err(input)?;
    Ok(sel)
}

fn load_documents(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    paths
        .iter()
        .map(|p| {
            let file = std::fs::File::open(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            read_unified(std::io::BufReader::new(file)).map_err(|e| input(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn check_datasets(datasets: &[Dataset], wanted: &BTreeSet<String>) -> Result<()> {
    for id in wanted {
        if !datasets.iter().any(|d| &d.dataset_id == id) {
            return Err(input(format!("no loaded document has dataset id {id:?}")));
        }
    }
    Ok(())
}

fn emit(output: Option<&Path>, content: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, content).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(internal)?;
            out.flush().map_err(internal)
        }
    }
}

fn ingest_failure(archive: &Path, e: ParseError) -> Failure {
    let name = archive.display();
    match e {
        ParseError::Ingest(IngestError::UnknownService) => input(format!(
            "{name}: could not detect the service; pass --service <facebook|google|instagram|twitter>"
        )),
        ParseError::Ingest(IngestError::Io(e)) => input(format!("{name}: {e}")),
        e @ (ParseError::Ingest(_) | ParseError::Rules(_)) => input(format!("{name}: {e}")),
        ParseError::Model(e) => internal(format!("{name}: parsed dataset failed validation: {e}")),
    }
}

fn ingest(g: &Global, a: IngestArgs) -> Result<()> {
    if a.dataset_id.is_some() && a.archives.len() > 1 {
        return Err(input("--dataset-id needs exactly one archive"));
    }
    let ingested_at = a
        .ingested_at
        .as_deref()
        .map(|s| parse_rfc3339(s, "--ingested-at"))
        .transpose()?;
    let config = IngestConfig {
        signatures: signatures(g)?,
        rules: rules(g)?,
        ..IngestConfig::default()
    };
    let request = IngestRequest {
        service: a.service.clone(),
        dataset_id: a.dataset_id.clone(),
        ingested_at,
    };
    let mut outputs = BTreeSet::new();
    for p in &a.archives {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !outputs.insert(stem.clone()) {
            return Err(input(format!("two archives share the name {stem:?}; rename one")));
        }
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| input(format!("{}: {e}", a.out_dir.display())))?;

    let results: Vec<Result<(PathBuf, datalens::Ingested)>> = a
        .archives
        .par_iter()
        .map(|p| {
            let archive = ExportArchive::open_path(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            let out = ingest_archive(&archive, &request, &config).map_err(|e| ingest_failure(p, e))?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let target = a.out_dir.join(format!("{stem}.unified.json"));
            let file = std::fs::File::create(&target).map_err(|e| input(format!("{}: {e}", target.display())))?;
            let mut w = std::io::BufWriter::new(file);
            write_unified(&out.dataset, &mut w).map_err(|e| input(format!("{}: {e}", target.display())))?;
            w.flush().map_err(|e| input(format!("{}: {e}", target.display())))?;
            Ok((target, out))
        })
        .collect();

    let (mut ok, mut elements, mut first_err) = (0usize, 0u64, None);
    for (p, r) in a.archives.iter().zip(results) {
        match r {
            Ok((target, out)) => {
                ok += 1;
                let rep = &out.report;
                elements += rep.elements_emitted;
                println!(
                    "{}: {} ({}) -> {}: {} elements from {} files, {} files without rules, {} warnings",
                    p.display(),
                    out.dataset.service,
                    if out.detected { "detected" } else { "forced" },
                    target.display(),
                    rep.elements_emitted,
                    rep.files_parsed,
                    rep.files_skipped,
                    rep.warnings.len()
                );
                if a.verbose {
                    for w in &rep.warnings {
                        println!("  warning: {}: {}", w.path, w.message);
                    }
                }
            }
            Err(e) => {
                eprintln!("datalens: {e}");
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    println!(
        "total: {ok} of {} archives ingested, {elements} elements",
        a.archives.len()
    );
    match first_err {
        None => Ok(()),
        Some(e) => Err(match e {
            Failure::Input(_) => input("some archives failed"),
            Failure::Internal(_) => internal("some archives failed"),
        }),
    }
}

fn detect(g: &Global, archive: &Path) -> Result<()> {
    let bytes = std::fs::read(archive).map_err(|e| input(format!("{}: {e}", archive.display())))?;
    let listing = list_archive(&bytes).map_err(|e| input(format!("{}: {e}", archive.display())))?;
    match datalens::detect_service(&listing, &signatures(g)?) {
        Ok(s) => {
            println!("{s}");
            Ok(())
        }
        Err(IngestError::UnknownService) => Err(input(format!(
            "{}: no service signature matches; known services: {}",
            archive.display(),
            signatures(g)?.services().collect::<Vec<_>>().join(", ")
        ))),
        Err(e) => Err(input(format!("{}: {e}", archive.display()))),
    }
}

fn list(archive: &Path, format: TableOrJson) -> Result<()> {
    let bytes = std::fs::read(archive).map_err(|e| input(format!("{}: {e}", archive.display())))?;
    let listing = list_archive(&bytes).map_err(|e| input(format!("{}: {e}", archive.display())))?;
    let files = datalens::ingest::build_file_elements(&listing, "");
    let text = match format {
        TableOrJson::Json => serde_json::to_string_pretty(&files).map_err(internal)? + "\n",
        TableOrJson::Table => {
            let mut s = format!("{:<10} {:>12}  {}\n", "type", "bytes", "path");
            for f in &files {
                s.push_str(&format!(
                    "{:<10} {:>12}  {}\n",
                    format!("{:?}", f.file_category),
                    f.size_bytes,
                    f.path()
                ));
            }
            s
        }
    };
    emit(None, &text)
}

fn stats(g: &Global, a: StatsArgs) -> Result<()> {
    let offset = tz_offset(g)?;
    let datasets = load_documents(&a.documents)?;
    let sel = selection(&a.selection, offset)?;
    check_datasets(&datasets, &sel.dataset_ids)?;
    let view = merge(&datasets).map_err(input)?;
    let stats = compute_stats(&view, &sel);
    let text = match a.format {
        TableOrJson::Table => render::stats_table(&stats),
        TableOrJson::Json => serde_json::to_string_pretty(&render::stats_json(&stats)).map_err(internal)? + "\n",
    };
    emit(None, &text)
}

fn treemap(a: TreemapArgs) -> Result<()> {
    let datasets = load_documents(&a.documents)?;
    let wanted: BTreeSet<String> = a.datasets.iter().cloned().collect();
    check_datasets(&datasets, &wanted)?;
    let view = merge(&datasets).map_err(input)?;
    let files = view
        .files()
        .filter(|f| wanted.is_empty() || wanted.contains(&f.dataset_id));
    let nodes = nodes_for(files, a.scale);
    let rects = layout(&nodes, a.width, a.height).map_err(|e| match e {
        LayoutError::AllZeroWeights => input(format!(
            "{e} (every file has zero {}; try --scale {})",
            a.scale,
            if a.scale == datalens::Scale::Size {
                "count"
            } else {
                "size"
            }
        )),
        e => input(e),
    })?;
    let text = match a.format {
        SvgOrJson::Svg => render::treemap_svg(&rects, a.width, a.height),
        SvgOrJson::Json => {
            serde_json::to_string(&render::treemap_geometry(&rects, a.width, a.height, a.scale)).map_err(internal)?
                + "\n"
        }
    };
    emit(a.output.as_deref(), &text)
}

fn timeline(g: &Global, a: TimelineArgs) -> Result<()> {
    let offset = tz_offset(g)?;
    let datasets = load_documents(&a.documents)?;
    let mut sel = selection(&a.selection, offset)?;
    check_datasets(&datasets, &sel.dataset_ids)?;
    let from = a.from.as_deref().map(|s| parse_date(s, "--from")).transpose()?;
    let to = a.to.as_deref().map(|s| parse_date(s, "--to")).transpose()?;
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(input("--from is after --to"));
        }
    }
    if from.is_some() || to.is_some() {
        let mut range = sel.time_range.unwrap_or(TimeRange {
            start: DateTime::<Utc>::MIN_UTC,
            end: DateTime::<Utc>::MAX_UTC,
        });
        if let Some(f) = from {
            range.start = range.start.max(day_bound(f, false, offset));
        }
        if let Some(t) = to {
            range.end = range.end.min(day_bound(t, true, offset));
        }
        sel.time_range = Some(range);
    }
    let view = merge(&datasets).map_err(input)?;
    let offset_s = offset.local_minus_utc();
    let parts = partition_by_dataset(&view, &sel, offset_s);
    let panels: Vec<TimelinePanel> = if a.split_by_dataset {
        parts
            .into_iter()
            .map(|(d, points)| TimelinePanel {
                label: format!("{} ({})", d.dataset_id, d.service),
                points,
            })
            .collect()
    } else {
        let mut points: Vec<_> = parts.into_iter().flat_map(|(_, p)| p).collect();
        points.sort_by(|x, y| datalens::model::element_order(x.element, y.element));
        let label = if datasets.len() == 1 {
            format!("{} ({})", datasets[0].dataset_id, datasets[0].service)
        } else {
            format!("{} datasets merged", datasets.len())
        };
        vec![TimelinePanel { label, points }]
    };
    let text = match a.format {
        SvgOrJson::Svg => render::timeline_svg(
            &panels,
            &TimelineOptions {
                width: a.width,
                panel_height: a.panel_height,
                from,
                to,
                tz_offset_seconds: offset_s,
                ..TimelineOptions::default()
            },
        ),
        SvgOrJson::Json => {
            serde_json::to_string(&render::timeline_geometry(&panels, offset_s)).map_err(internal)? + "\n"
        }
    };
    emit(a.output.as_deref(), &text)
}

fn fixture_cmd(a: FixtureArgs) -> Result<()> {
    let specs: Vec<(String, FixtureSpec)> = if let Some(p) = &a.preset {
        fixture::preset(p).map_err(input)?
    } else if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        let spec: FixtureSpec = serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
        let name = format!("{}-{}", spec.service, spec.seed);
        vec![(name, spec)]
    } else if a.random {
        let spec = FixtureSpec::random(a.seed);
        vec![(format!("{}-{}", spec.service, spec.seed), spec)]
    } else {
        if a.from_year > a.to_year {
            return Err(input("--from-year is after --to-year"));
        }
        let v = &a.volume;
        let volume = Volume {
            conversations: v.conversations,
            messages_per_conversation: v.messages_per_conversation,
            posts: v.posts,
            logins: v.logins,
            locations: v.locations,
            searches: v.searches,
            media_files: v.media_files,
            contacts: v.contacts,
            activities: v.activities,
            account_events: v.account_events,
        };
        let mut spec = FixtureSpec::new(&a.service, a.seed, volume, TimeSpan::years(a.from_year, a.to_year));
        if let Some(o) = &a.owner {
            spec.owner = o.clone();
        }
        vec![(format!("{}-{}", a.service, a.seed), spec)]
    };
    if a.name.is_some() && specs.len() > 1 {
        return Err(input("--name needs a single-archive fixture"));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| input(format!("{}: {e}", a.out_dir.display())))?;
    for (name, spec) in specs {
        let name = a.name.clone().unwrap_or(name);
        let (bytes, manifest) = fixture::generate(&spec).map_err(|e| match e {
            fixture::FixtureError::Zip(_) | fixture::FixtureError::Io(_) => internal(e),
            e => input(e),
        })?;
        let zip_path = a.out_dir.join(format!("{name}.zip"));
        let manifest_path = a.out_dir.join(format!("{name}.manifest.json"));
        std::fs::write(&zip_path, &bytes).map_err(|e| input(format!("{}: {e}", zip_path.display())))?;
        let text = serde_json::to_string_pretty(&manifest).map_err(internal)? + "\n";
        std::fs::write(&manifest_path, text).map_err(|e| input(format!("{}: {e}", manifest_path.display())))?;
        let digest = ExportArchive::open(name.clone(), bytes).map_err(internal)?.digest();
        println!(
            "{}: {} fixture, {} files, {} elements, sha256 {digest}",
            zip_path.display(),
            spec.service,
            manifest.files.len(),
            manifest.total_elements()
        );
    }
    Ok(())
}

fn ratings_path(g: &Global) -> Result<PathBuf> {
    if let Some(p) = &g.ratings {
        return Ok(p.clone());
    }
    match std::env::var_os("HOME") {
        Some(home) => Ok(PathBuf::from(home).join(".local/share/datalens/ratings.json")),
        None => Err(input("no ratings file: pass --ratings or set DATALENS_RATINGS")),
    }
}

fn rate(g: &Global, a: RateArgs) -> Result<()> {
    let datasets = load_documents(&a.documents)?;
    let view = merge(&datasets).map_err(input)?;
    let path = ratings_path(g)?;
    let at = match &a.at {
        Some(s) => parse_rfc3339(s, "--at")?,
        None => Utc::now(),
    };
    let mut store = RatingStore::load(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    store.rate(&a.element, a.value, at, &view).map_err(input)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    }
    store
        .save(&path)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    let avg = store.average(view.elements().iter().map(|e| e.id.as_str()));
    println!(
        "rated {} = {}; average over {} rated elements: {}",
        a.element,
        a.value,
        view.elements().iter().filter(|e| store.get(&e.id).is_some()).count(),
        avg.map_or("none".to_owned(), |v| format!("{v:.6}"))
    );
    Ok(())
}

fn average(g: &Global, a: AverageArgs) -> Result<()> {
    let offset = tz_offset(g)?;
    let datasets = load_documents(&a.documents)?;
    let sel = selection(&a.selection, offset)?;
    check_datasets(&datasets, &sel.dataset_ids)?;
    let view = merge(&datasets).map_err(input)?;
    let path = ratings_path(g)?;
    let store = RatingStore::load(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let selected = apply_selection(&view, &sel);
    let rated = selected.iter().filter(|e| store.get(&e.id).is_some()).count();
    let avg = store.average(selected.iter().map(|e| e.id.as_str()));
    println!(
        "{} ({rated} of {} selected elements rated)",
        avg.map_or("none".to_owned(), |v| format!("{v:.6}")),
        selected.len()
    );
    Ok(())
}

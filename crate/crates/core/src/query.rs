//! Read-only analytics over one or more datasets: merging, selections,
//! timeline projection and summary statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::AddAssign;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{element_order, Category, DataElement, Dataset, FileElement};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("dataset id {0:?} appears more than once")]
    DuplicateDataset(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
}

/// Several datasets seen as one, elements ordered by time (nulls last),
/// then id.
#[derive(Debug, Clone)]
pub struct MergedView<'a> {
    datasets: Vec<&'a Dataset>,
    elements: Vec<&'a DataElement>,
    by_id: HashMap<&'a str, &'a DataElement>,
}

/// Merges datasets, keeping their order as the ingestion order.
pub fn merge<'a, I>(datasets: I) -> Result<MergedView<'a>, QueryError>
where
    I: IntoIterator<Item = &'a Dataset>,
{
    let datasets: Vec<&Dataset> = datasets.into_iter().collect();
    let mut seen = BTreeSet::new();
    for d in &datasets {
        if !seen.insert(d.dataset_id.as_str()) {
            return Err(QueryError::DuplicateDataset(d.dataset_id.clone()));
        }
    }
    let mut elements: Vec<&DataElement> = datasets.iter().flat_map(|d| d.elements()).collect();
    // stable sort keeps ingestion order for the (unlikely) equal-key case
    elements.sort_by(|a, b| element_order(a, b));
    let by_id = elements.iter().map(|e| (e.id.as_str(), *e)).collect();
    Ok(MergedView {
        datasets,
        elements,
        by_id,
    })
}

impl<'a> MergedView<'a> {
    pub fn datasets(&self) -> &[&'a Dataset] {
        &self.datasets
    }

    pub fn elements(&self) -> &[&'a DataElement] {
        &self.elements
    }

    pub fn files(&self) -> impl Iterator<Item = &'a FileElement> + '_ {
        self.datasets.iter().flat_map(|d| d.files())
    }

    pub fn dataset(&self, dataset_id: &str) -> Option<&'a Dataset> {
        self.datasets.iter().copied().find(|d| d.dataset_id == dataset_id)
    }

    pub fn element(&self, id: &str) -> Option<&'a DataElement> {
        self.by_id.get(id).copied()
    }

    pub fn contains_element(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }
}

/// Inclusive UTC time interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeRange {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Filter shared by every view. Empty sets mean "no constraint".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub dataset_ids: BTreeSet<String>,
    pub categories: BTreeSet<Category>,
    pub time_range: Option<TimeRange>,
    pub query: Option<String>,
}

impl Selection {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        match self.time_range {
            Some(r) if r.start > r.end => Err(QueryError::InvalidSelection("time range start is after its end".into())),
            _ => Ok(()),
        }
    }
}

/// Caseless form used by search: every character mapped to uppercase and
/// back to lowercase, character by character, so that `q` and its
/// uppercase form fold identically.
pub fn fold_case(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii() {
            out.push(c.to_ascii_lowercase());
        } else {
            for u in c.to_uppercase() {
                out.extend(u.to_lowercase());
            }
        }
    }
    out
}

struct Matcher<'s> {
    selection: &'s Selection,
    needle: Option<String>,
}

impl<'s> Matcher<'s> {
    fn new(selection: &'s Selection) -> Self {
        Matcher {
            selection,
            needle: selection.query.as_deref().filter(|q| !q.is_empty()).map(fold_case),
        }
    }

    fn accepts(&self, e: &DataElement) -> bool {
        let s = self.selection;
        if !s.dataset_ids.is_empty() && !s.dataset_ids.contains(&e.dataset_id) {
            return false;
        }
        if !s.categories.is_empty() && !s.categories.contains(&e.category) {
            return false;
        }
        if let Some(range) = s.time_range {
            match e.time {
                Some(t) if range.contains(t) => {}
                _ => return false,
            }
        }
        match &self.needle {
            Some(n) => fold_case(&e.text).contains(n.as_str()) || fold_case(&e.subcategory).contains(n.as_str()),
            None => true,
        }
    }
}

/// Elements of `view` satisfying every constraint of `selection`, in view
/// order.
pub fn apply_selection<'a>(view: &MergedView<'a>, selection: &Selection) -> Vec<&'a DataElement> {
    let m = Matcher::new(selection);
    view.elements.iter().copied().filter(|e| m.accepts(e)).collect()
}

/// Position of an element in the date × time-of-day plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimePoint<'a> {
    pub element: &'a DataElement,
    /// Days since 1970-01-01.
    pub day: i64,
    /// Seconds since midnight, in `[0, 86400)`.
    pub second_of_day: u32,
}

/// Projects timed elements onto (day, time of day) in UTC shifted by
/// `offset_seconds`. Elements without time produce no point.
pub fn timeline_project_with_offset<'a>(elements: &[&'a DataElement], offset_seconds: i32) -> Vec<TimePoint<'a>> {
    elements
        .iter()
        .filter_map(|e| {
            let t = e.time?.timestamp() + i64::from(offset_seconds);
            Some(TimePoint {
                element: e,
                day: t.div_euclid(SECONDS_PER_DAY),
                second_of_day: t.rem_euclid(SECONDS_PER_DAY) as u32,
            })
        })
        .collect()
}

pub fn timeline_project<'a>(elements: &[&'a DataElement]) -> Vec<TimePoint<'a>> {
    timeline_project_with_offset(elements, 0)
}

/// One timeline per dataset, in ingestion order, over the selected elements.
pub fn partition_by_dataset<'a>(
    view: &MergedView<'a>,
    selection: &Selection,
    offset_seconds: i32,
) -> Vec<(&'a Dataset, Vec<TimePoint<'a>>)> {
    let selected = apply_selection(view, selection);
    let points = timeline_project_with_offset(&selected, offset_seconds);
    let mut parts: Vec<(&Dataset, Vec<TimePoint>)> = view.datasets.iter().map(|d| (*d, Vec::new())).collect();
    let slot: HashMap<&str, usize> = view
        .datasets
        .iter()
        .enumerate()
        .map(|(i, d)| (d.dataset_id.as_str(), i))
        .collect();
    for p in points {
        parts[slot[p.element.dataset_id.as_str()]].1.push(p);
    }
    parts
}

/// Identifies a file across merged datasets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FileKey {
    pub dataset_id: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileCount {
    #[serde(flatten)]
    pub key: FileKey,
    pub count: u64,
}

/// Counts over the selected elements. Categories always list all ten;
/// services and files only those with selected elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    pub per_category: BTreeMap<Category, u64>,
    pub per_service: BTreeMap<String, u64>,
    pub per_file: BTreeMap<FileKey, u64>,
    pub total_elements: u64,
    /// Sum of `size_bytes` over the files in `per_file`.
    pub total_size_bytes: u64,
    pub time_extent: Option<(DateTime<Utc>, DateTime<Utc>)>,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            per_category: Category::ALL.iter().map(|c| (*c, 0)).collect(),
            per_service: BTreeMap::new(),
            per_file: BTreeMap::new(),
            total_elements: 0,
            total_size_bytes: 0,
            time_extent: None,
        }
    }
}

fn widen(
    a: Option<(DateTime<Utc>, DateTime<Utc>)>,
    b: Option<(DateTime<Utc>, DateTime<Utc>)>,
) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
    match (a, b) {
        (Some((a0, a1)), Some((b0, b1))) => Some((a0.min(b0), a1.max(b1))),
        (x, None) | (None, x) => x,
    }
}

impl AddAssign<&Stats> for Stats {
    fn add_assign(&mut self, other: &Stats) {
        for (c, n) in &other.per_category {
            *self.per_category.entry(*c).or_default() += n;
        }
        for (s, n) in &other.per_service {
            *self.per_service.entry(s.clone()).or_default() += n;
        }
        for (f, n) in &other.per_file {
            *self.per_file.entry(f.clone()).or_default() += n;
        }
        self.total_elements += other.total_elements;
        self.total_size_bytes += other.total_size_bytes;
        self.time_extent = widen(self.time_extent, other.time_extent);
    }
}

impl Stats {
    pub fn files(&self) -> Vec<FileCount> {
        self.per_file
            .iter()
            .map(|(k, n)| FileCount {
                key: k.clone(),
                count: *n,
            })
            .collect()
    }
}

pub fn compute_stats(view: &MergedView<'_>, selection: &Selection) -> Stats {
    let mut stats = Stats::default();
    let service_of: HashMap<&str, &str> = view
        .datasets
        .iter()
        .map(|d| (d.dataset_id.as_str(), d.service.as_str()))
        .collect();
    for e in apply_selection(view, selection) {
        stats.total_elements += 1;
        *stats.per_category.entry(e.category).or_default() += 1;
        *stats
            .per_service
            .entry(service_of[e.dataset_id.as_str()].to_owned())
            .or_default() += 1;
        *stats
            .per_file
            .entry(FileKey {
                dataset_id: e.dataset_id.clone(),
                path: e.source_file.clone(),
            })
            .or_default() += 1;
        if let Some(t) = e.time {
            stats.time_extent = widen(stats.time_extent, Some((t, t)));
        }
    }
    stats.total_size_bytes = stats
        .per_file
        .keys()
        .filter_map(|k| view.dataset(&k.dataset_id)?.file(&k.path))
        .map(|f| f.size_bytes)
        .sum();
    stats
}

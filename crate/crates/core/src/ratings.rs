//! Perceived-sensitivity ratings, one per data element, persisted locally.
//!
//! The ratings file is a JSON array of `{element_id, value, rated_at}`
//! objects sorted by `element_id`. Element ids are content hashes, so a
//! rating follows its element across re-parses of the same archive.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Dataset;
use crate::query::MergedView;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("rating value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("no loaded data element has id {0}")]
    UnknownElement(String),
    #[error("ratings file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can tell whether an element id is loaded.
pub trait ElementCatalog {
    fn contains_element(&self, id: &str) -> bool;
}

impl ElementCatalog for MergedView<'_> {
    fn contains_element(&self, id: &str) -> bool {
        MergedView::contains_element(self, id)
    }
}

impl ElementCatalog for Dataset {
    fn contains_element(&self, id: &str) -> bool {
        self.elements().iter().any(|e| e.id == id)
    }
}

impl ElementCatalog for HashSet<String> {
    fn contains_element(&self, id: &str) -> bool {
        self.contains(id)
    }
}

impl ElementCatalog for BTreeSet<String> {
    fn contains_element(&self, id: &str) -> bool {
        self.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityRating {
    pub element_id: String,
    pub value: f64,
    pub rated_at: DateTime<Utc>,
}

fn check_value(value: f64) -> Result<(), RatingError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RatingError::OutOfRange(value))
    }
}

/// In-memory rating store. Single writer; clone for a read snapshot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingStore {
    ratings: BTreeMap<String, SensitivityRating>,
}

impl RatingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a rating. An existing rating with a strictly later
    /// `rated_at` is kept; on equal times the new rating wins.
    pub fn rate(
        &mut self,
        element_id: &str,
        value: f64,
        rated_at: DateTime<Utc>,
        catalog: &dyn ElementCatalog,
    ) -> Result<(), RatingError> {
        check_value(value)?;
        if !catalog.contains_element(element_id) {
            return Err(RatingError::UnknownElement(element_id.to_owned()));
        }
        if self.ratings.get(element_id).is_some_and(|r| r.rated_at > rated_at) {
            return Ok(());
        }
        self.ratings.insert(
            element_id.to_owned(),
            SensitivityRating {
                element_id: element_id.to_owned(),
                value,
                rated_at,
            },
        );
        Ok(())
    }

    pub fn get(&self, element_id: &str) -> Option<&SensitivityRating> {
        self.ratings.get(element_id)
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Ratings in element id order.
    pub fn iter(&self) -> impl Iterator<Item = &SensitivityRating> {
        self.ratings.values()
    }

    /// Mean rating over the rated elements among `ids`; `None` when none
    /// of them is rated. Unrated elements do not pull the mean down.
    pub fn average<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Option<f64> {
        let mut seen = HashSet::new();
        let values: Vec<f64> = ids
            .into_iter()
            .filter(|id| seen.insert(*id))
            .filter_map(|id| self.ratings.get(id).map(|r| r.value))
            .collect();
        mean(&values)
    }

    /// Mean over every stored rating.
    pub fn average_all(&self) -> Option<f64> {
        mean(&self.ratings.values().map(|r| r.value).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&SensitivityRating> = self.ratings.values().collect();
        let mut s = serde_json::to_string_pretty(&list).expect("ratings serialize");
        s.push('\n');
        s
    }

    /// Parses a ratings document. Values must lie in [0, 1]; when an id
    /// appears twice the later `rated_at` wins.
    pub fn from_json(text: &str) -> Result<Self, RatingError> {
        let list: Vec<SensitivityRating> = serde_json::from_str(text)?;
        let mut ratings: BTreeMap<String, SensitivityRating> = BTreeMap::new();
        for r in list {
            check_value(r.value)?;
            match ratings.get(&r.element_id) {
                Some(prev) if prev.rated_at > r.rated_at => {}
                _ => {
                    ratings.insert(r.element_id.clone(), r);
                }
            }
        }
        Ok(RatingStore { ratings })
    }

    /// Loads `path`, treating a missing file as an empty store.
    pub fn load(path: &Path) -> Result<Self, RatingError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes to a temporary file next to `path`, then renames it over.
    pub fn save(&self, path: &Path) -> Result<(), RatingError> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_json().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let sum: f64 = values.iter().sum();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    // rounding can push sum/n a hair past the extremes
    Some((sum / values.len() as f64).clamp(lo, hi))
}

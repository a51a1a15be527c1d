//! Declarative per-service parser rules.
//!
//! Each service ships one TOML rule file. A rule binds a path glob to a file
//! format, a data category and a field recipe; rules are tried in file
//! order and the first whose glob matches an entry owns it.
//!
//! ```toml
//! version = 1
//! service = "facebook"
//! repair_mojibake = true
//!
//! [[rule]]
//! name = "messages"
//! glob = "messages/inbox/*/message_*.json"
//! format = "json"                  # json | js-wrapped-json | csv
//! category = "Messages"
//! records = "/messages/*"          # pointer, `*` enumerates arrays/objects
//! time = "/timestamp_ms"           # reference, see `template`
//! time_format = "epoch_ms"         # auto | epoch_s | epoch_ms | epoch_us | iso8601 | pattern:<strftime>
//! text = '{/sender_name} says: "{/content}"'
//! subcategory = "Chat with {$/title}"   # defaults to the rule name
//! require = ["/content"]           # records lacking these are dropped
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use globset::{GlobBuilder, GlobMatcher};
use serde::Deserialize;
use thiserror::Error;

use super::template::{RecordsPath, Reference, Template};
use super::timestamp::TimeHint;
use crate::model::Category;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule file {origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("no parser rules for service {0:?}")]
    UnknownService(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const BUILTIN_RULES: [(&str, &str); 4] = [
    ("facebook", include_str!("../../rules/facebook.toml")),
    ("google", include_str!("../../rules/google.toml")),
    ("instagram", include_str!("../../rules/instagram.toml")),
    ("twitter", include_str!("../../rules/twitter.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Format {
    #[serde(rename = "json")]
    Json,
    #[serde(rename = "js-wrapped-json")]
    JsWrappedJson,
    #[serde(rename = "csv")]
    Csv,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    version: u32,
    service: String,
    #[serde(default)]
    repair_mojibake: bool,
    #[serde(default, rename = "rule")]
    rules: Vec<RuleEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    name: String,
    glob: String,
    format: Format,
    category: String,
    #[serde(default = "default_records")]
    records: String,
    time: Option<String>,
    #[serde(default)]
    time_format: TimeHint,
    text: String,
    subcategory: Option<String>,
    #[serde(default)]
    require: Vec<String>,
}

fn default_records() -> String {
    "/*".to_owned()
}

/// A compiled rule.
#[derive(Debug, Clone)]
pub struct ParserRule {
    pub name: String,
    pub path_glob: String,
    pub format: Format,
    pub category: Category,
    pub records: RecordsPath,
    pub time: Option<Reference>,
    pub time_format: TimeHint,
    pub text: Template,
    pub subcategory: Template,
    pub require: Vec<Reference>,
    matcher: GlobMatcher,
}

impl ParserRule {
    pub fn matches(&self, path: &str) -> bool {
        self.matcher.is_match(path)
    }
}

/// All rules of one service, in match order.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub service: String,
    pub repair_mojibake: bool,
    pub rules: Vec<ParserRule>,
}

impl RuleSet {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, RuleError> {
        let invalid = |message: String| RuleError::Invalid {
            origin: origin.to_owned(),
            message,
        };
        let file: RuleFile = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if file.version != 1 {
            return Err(invalid(format!("unsupported version {}", file.version)));
        }
        let mut rules = Vec::with_capacity(file.rules.len());
        for entry in file.rules {
            let ctx = |m: String| invalid(format!("rule {:?}: {m}", entry.name));
            let matcher = GlobBuilder::new(&entry.glob)
                .literal_separator(true)
                .build()
                .map_err(|e| ctx(e.to_string()))?
                .compile_matcher();
            let category: Category = entry
                .category
                .parse()
                .map_err(|e: crate::model::ModelError| ctx(e.to_string()))?;
            let records = RecordsPath::parse(&entry.records).map_err(&ctx)?;
            let time = entry.time.as_deref().map(Reference::parse).transpose().map_err(&ctx)?;
            let text = Template::parse(&entry.text).map_err(&ctx)?;
            let subcategory = match &entry.subcategory {
                Some(s) => Template::parse(s),
                None => Template::parse(&entry.name.replace('{', "{{").replace('}', "}}")),
            }
            .map_err(&ctx)?;
            let require = entry
                .require
                .iter()
                .map(|r| Reference::parse(r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(&ctx)?;

            let wildcards = records.wildcards();
            let refs = text
                .references()
                .chain(subcategory.references())
                .chain(time.iter())
                .chain(require.iter());
            for r in refs {
                if let Some(n) = r.wildcard_index() {
                    if n >= wildcards {
                        return Err(ctx(format!(
                            "reference to wildcard {n} but records path has {wildcards}"
                        )));
                    }
                }
            }
            rules.push(ParserRule {
                name: entry.name,
                path_glob: entry.glob,
                format: entry.format,
                category,
                records,
                time,
                time_format: entry.time_format,
                text,
                subcategory,
                require,
                matcher,
            });
        }
        Ok(RuleSet {
            service: file.service,
            repair_mojibake: file.repair_mojibake,
            rules,
        })
    }

    /// First rule whose glob matches `path`.
    pub fn rule_for(&self, path: &str) -> Option<(usize, &ParserRule)> {
        self.rules.iter().enumerate().find(|(_, r)| r.matches(path))
    }
}

/// Rule sets keyed by service.
#[derive(Debug, Clone)]
pub struct RuleBook {
    sets: BTreeMap<String, RuleSet>,
}

impl RuleBook {
    pub fn builtin() -> Self {
        let sets = BUILTIN_RULES
            .iter()
            .map(|(name, text)| {
                let set = RuleSet::from_toml(text, &format!("builtin:{name}")).expect("builtin rule tables are valid");
                (set.service.clone(), set)
            })
            .collect();
        RuleBook { sets }
    }

    pub fn insert(&mut self, set: RuleSet) {
        self.sets.insert(set.service.clone(), set);
    }

    /// Loads every `*.toml` in `dir`, each replacing the builtin set of the
    /// same service or adding a new one.
    pub fn with_overrides_from_dir(mut self, dir: &Path) -> Result<Self, RuleError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            self.insert(RuleSet::from_toml(&text, &p.display().to_string())?);
        }
        Ok(self)
    }

    pub fn get(&self, service: &str) -> Result<&RuleSet, RuleError> {
        self.sets
            .get(service)
            .ok_or_else(|| RuleError::UnknownService(service.to_owned()))
    }

    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}

//! Deterministic synthetic export archives.
//!
//! Real exports cannot be redistributed, so tests and demos run on archives
//! that imitate each service's layout closely enough to exercise every
//! builtin parser rule. Generation is a pure function of the spec: the same
//! spec yields a byte-identical zip. Text comes from fixed word lists.

use std::collections::BTreeMap;
use std::io::{Cursor, Write};

use chrono::{DateTime, Datelike, SecondsFormat, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use zip::write::SimpleFileOptions;

use crate::model::{Category, FileElement};

pub const SERVICES: [&str; 4] = ["facebook", "google", "instagram", "twitter"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("no fixture generator for service {0:?} (supported: facebook, google, instagram, twitter)")]
    UnsupportedService(String),
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("unknown preset {0:?} (expected use-case-1 or use-case-2)")]
    UnknownPreset(String),
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inclusive UTC interval, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[DateTime<Utc>; 2]", into = "[DateTime<Utc>; 2]")]
pub struct TimeSpan {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl From<[DateTime<Utc>; 2]> for TimeSpan {
    fn from([start, end]: [DateTime<Utc>; 2]) -> Self {
        TimeSpan { start, end }
    }
}

impl From<TimeSpan> for [DateTime<Utc>; 2] {
    fn from(s: TimeSpan) -> Self {
        [s.start, s.end]
    }
}

impl TimeSpan {
    /// Whole calendar years `from..=to`.
    pub fn years(from: i32, to: i32) -> Self {
        TimeSpan {
            start: Utc.with_ymd_and_hms(from, 1, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(to, 12, 31, 23, 59, 59).unwrap(),
        }
    }

    fn contains(&self, other: &TimeSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// How many records of each kind to generate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Volume {
    pub conversations: u32,
    pub messages_per_conversation: u32,
    pub posts: u32,
    pub logins: u32,
    pub locations: u32,
    pub searches: u32,
    pub media_files: u32,
    pub contacts: u32,
    pub activities: u32,
    pub account_events: u32,
}

impl Volume {
    pub fn total_elements(&self) -> u64 {
        let v = |x: u32| u64::from(x);
        v(self.conversations) * v(self.messages_per_conversation)
            + v(self.posts)
            + v(self.logins)
            + v(self.locations)
            + v(self.searches)
            + v(self.media_files)
            + v(self.contacts)
            + v(self.activities)
            + v(self.account_events)
    }
}

/// One extra conversation with a named partner and its own time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Highlight {
    pub partner: String,
    pub messages: u32,
    pub time_span: TimeSpan,
}

fn default_owner() -> String {
    "Sam".to_owned()
}

fn default_mojibake() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub service: String,
    pub seed: u64,
    pub volume: Volume,
    pub time_span: TimeSpan,
    /// Display name of the account holder.
    #[serde(default = "default_owner")]
    pub owner: String,
    #[serde(default)]
    pub highlight: Option<Highlight>,
    /// Narrower windows for individual categories, each inside `time_span`.
    #[serde(default)]
    pub category_spans: BTreeMap<Category, TimeSpan>,
    /// Share of Facebook messages carrying non-ASCII words, which Facebook
    /// stores as mojibake.
    #[serde(default = "default_mojibake")]
    pub mojibake_fraction: f64,
}

impl FixtureSpec {
    pub fn new(service: &str, seed: u64, volume: Volume, time_span: TimeSpan) -> Self {
        FixtureSpec {
            service: service.to_owned(),
            seed,
            volume,
            time_span,
            owner: default_owner(),
            highlight: None,
            category_spans: BTreeMap::new(),
            mojibake_fraction: default_mojibake(),
        }
    }

    /// A spec with every volume drawn from `seed`, at most 10 000 elements.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1c7);
        let service = SERVICES[(seed % 4) as usize];
        let mut r = |hi: u32| rng.random_range(0..=hi);
        let volume = Volume {
            conversations: r(12),
            messages_per_conversation: r(300),
            posts: r(400),
            logins: r(200),
            locations: r(2500),
            searches: r(400),
            media_files: r(30),
            contacts: r(300),
            activities: r(1500),
            account_events: r(20),
        };
        let from = 2008 + r(8) as i32;
        let to = from + r(6) as i32;
        let mut spec = FixtureSpec::new(service, seed, volume, TimeSpan::years(from, to));
        spec.owner = PEOPLE[r(PEOPLE.len() as u32 - 1) as usize].to_owned();
        spec.mojibake_fraction = f64::from(r(50)) / 100.0;
        spec
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if !SERVICES.contains(&self.service.as_str()) {
            return Err(FixtureError::UnsupportedService(self.service.clone()));
        }
        let bad = |m: String| Err(FixtureError::InvalidSpec(m));
        if self.time_span.start > self.time_span.end {
            return bad("time_span starts after it ends".into());
        }
        if !(0.0..=1.0).contains(&self.mojibake_fraction) {
            return bad(format!(
                "mojibake_fraction {} is outside [0, 1]",
                self.mojibake_fraction
            ));
        }
        if self.owner.trim().is_empty() {
            return bad("owner must not be empty".into());
        }
        for (c, span) in &self.category_spans {
            if span.start > span.end || !self.time_span.contains(span) {
                return bad(format!("span for {c} must be ordered and inside time_span"));
            }
        }
        if let Some(h) = &self.highlight {
            if h.partner.trim().is_empty() {
                return bad("highlight partner must not be empty".into());
            }
            if h.time_span.start > h.time_span.end || !self.time_span.contains(&h.time_span) {
                return bad("highlight time_span must be ordered and inside time_span".into());
            }
        }
        Ok(())
    }

    fn span_for(&self, c: Category) -> TimeSpan {
        self.category_spans.get(&c).copied().unwrap_or(self.time_span)
    }
}

/// What a parse of the generated archive must produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<FileElement>,
    pub expected_counts: BTreeMap<Category, u64>,
    pub expected_service: String,
}

impl Manifest {
    pub fn total_elements(&self) -> u64 {
        self.expected_counts.values().sum()
    }

    /// Largest file, by size, whose elements are of `category`.
    pub fn largest_file_of(&self, category: Category) -> Option<&FileElement> {
        self.files
            .iter()
            .filter(|f| f.data_category == Some(category))
            .max_by_key(|f| f.size_bytes)
    }
}

// Fictional first names. Kept free of "alice" so that a search for the
// highlight partner only hits the highlight conversation.
const PEOPLE: &[&str] = &[
    "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi", "Ivan", "Judy", "Mallory", "Niaj", "Olivia", "Peggy",
    "Rupert", "Sybil", "Trent", "Victor", "Walter", "Yusuf", "Zoe",
];

const WORDS: &[&str] = &[
    "morning", "coffee", "train", "late", "weekend", "movie", "dinner", "tonight", "tomorrow", "holiday", "beach",
    "rain", "sunny", "project", "meeting", "deadline", "birthday", "party", "concert", "tickets", "garden", "bike",
    "running", "football", "match", "pizza", "recipe", "book", "library", "museum", "photo", "camera", "mountain",
    "hike", "lake", "city", "bus", "airport", "flight", "hotel", "music", "playlist", "guitar", "piano", "lesson",
    "exam", "class", "homework", "office", "lunch", "soup", "bread", "market", "river", "bridge", "park", "dog", "cat",
    "friends", "family",
];

// Non-ASCII words; Facebook exports write their UTF-8 bytes as one
// escaped code point per byte.
const ACCENTED: &[&str] = &[
    "café",
    "naïve",
    "Zürich",
    "São Paulo",
    "crème brûlée",
    "jalapeño",
    "Ångström",
    "Straße",
    "😀",
    "👍",
];

const PLACES: &[(&str, f64, f64)] = &[
    ("Berlin", 52.52, 13.405),
    ("Hamburg", 53.551, 9.993),
    ("Vienna", 48.208, 16.373),
    ("Paris", 48.857, 2.352),
    ("Lisbon", 38.722, -9.139),
    ("Oslo", 59.914, 10.752),
    ("Prague", 50.075, 14.437),
    ("Madrid", 40.417, -3.704),
];

const PRODUCTS: &[&str] = &["Gmail", "YouTube", "Maps", "Drive", "Calendar", "Search"];
const AGENTS: &[&str] = &[
    "Firefox on Linux",
    "Chrome on Android",
    "Safari on iOS",
    "Edge on Windows",
];
const ADVERTISERS: &[&str] = &[
    "Bookshop Co",
    "Running Gear Ltd",
    "City Bikes",
    "Travel Deals",
    "Coffee Roasters",
];
const ACCOUNT_FIELDS: &[&str] = &[
    "email",
    "phone number",
    "password",
    "profile picture",
    "bio",
    "username",
];

struct Entry {
    path: String,
    bytes: Vec<u8>,
    category: Option<Category>,
    count: u64,
}

struct Builder<'a> {
    spec: &'a FixtureSpec,
    rng: ChaCha8Rng,
    entries: Vec<Entry>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a FixtureSpec) -> Self {
        Builder {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            entries: Vec::new(),
        }
    }

    fn add(&mut self, path: impl Into<String>, bytes: Vec<u8>, category: Category, count: u64) {
        self.entries.push(Entry {
            path: path.into(),
            bytes,
            category: (count > 0).then_some(category),
            count,
        });
    }

    fn add_plain(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        self.entries.push(Entry {
            path: path.into(),
            bytes,
            category: None,
            count: 0,
        });
    }

    /// `n` sorted epoch seconds spread over `span`, jittered around an even
    /// grid so long series look like periodic tracking.
    fn times(&mut self, n: u32, span: TimeSpan) -> Vec<i64> {
        let (lo, hi) = (span.start.timestamp(), span.end.timestamp());
        let width = (hi - lo + 1) as f64;
        let step = width / f64::from(n.max(1));
        let mut out: Vec<i64> = (0..n)
            .map(|i| {
                let offset = (f64::from(i) + self.rng.random::<f64>()) * step;
                (lo + offset as i64).min(hi)
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn times_for(&mut self, n: u32, c: Category) -> Vec<i64> {
        let span = self.spec.span_for(c);
        self.times(n, span)
    }

    fn pick(&mut self, list: &[&'static str]) -> &'static str {
        list.choose(&mut self.rng).copied().expect("non-empty list")
    }

    fn sentence(&mut self, accented: bool) -> String {
        let n = self.rng.random_range(2..=9);
        let mut words: Vec<&str> = (0..n).map(|_| self.pick(WORDS)).collect();
        if accented {
            let at = self.rng.random_range(0..=words.len());
            let w = self.pick(ACCENTED);
            words.insert(at, w);
        }
        let mut s = words.join(" ");
        if let Some(first) = s.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        s
    }

    fn person_other_than(&mut self, owner: &str) -> &'static str {
        loop {
            let p = self.pick(PEOPLE);
            if p != owner {
                return p;
            }
        }
    }

    fn ip(&mut self) -> String {
        let r = &mut self.rng;
        format!(
            "{}.{}.{}.{}",
            r.random_range(11..=223),
            r.random_range(0..=255),
            r.random_range(0..=255),
            r.random_range(1..=254)
        )
    }

    fn token(&mut self, len: usize) -> String {
        const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
        (0..len)
            .map(|_| ALPHABET[self.rng.random_range(0..ALPHABET.len())] as char)
            .collect()
    }

    /// Fake JPEG: SOI/APP0 header followed by noise.
    fn jpeg(&mut self, min: usize, max: usize) -> Vec<u8> {
        let len = self.rng.random_range(min..=max);
        let mut bytes = vec![0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, b'J', b'F', b'I', b'F', 0x00];
        bytes.extend((bytes.len()..len).map(|_| self.rng.random::<u8>()));
        bytes.extend([0xFF, 0xD9]);
        bytes
    }

    /// Conversation partners and message counts, highlight last.
    fn conversations(&mut self) -> Vec<(String, u32, TimeSpan)> {
        let spec = self.spec;
        let owner = spec.owner.clone();
        let mut out: Vec<(String, u32, TimeSpan)> = (0..spec.volume.conversations)
            .map(|_| {
                (
                    self.person_other_than(&owner).to_owned(),
                    spec.volume.messages_per_conversation,
                    spec.span_for(Category::Messages),
                )
            })
            .collect();
        if let Some(h) = &spec.highlight {
            out.push((h.partner.clone(), h.messages, h.time_span));
        }
        out
    }

    fn finish(mut self) -> Result<(Vec<u8>, Manifest), FixtureError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let options = SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated)
            .last_modified_time(zip::DateTime::default())
            .unix_permissions(0o644);
        let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        let mut files = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            zip.start_file(e.path.as_str(), options)?;
            zip.write_all(&e.bytes)?;
            let mut f = FileElement::new("", &e.path, e.bytes.len() as u64);
            f.data_category = e.category;
            f.element_count = e.count;
            files.push(f);
            if let Some(c) = e.category {
                *counts.entry(c).or_default() += e.count;
            }
        }
        let bytes = zip.finish()?.into_inner();
        files.sort_by(|a, b| (&a.folder, &a.file_name).cmp(&(&b.folder, &b.file_name)));
        Ok((
            bytes,
            Manifest {
                files,
                expected_counts: counts,
                expected_service: self.spec.service.clone(),
            },
        ))
    }
}

fn iso(t: i64) -> String {
    DateTime::from_timestamp(t, 0)
        .expect("generated time in range")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn iso_millis(t: i64, ms: u32) -> String {
    (DateTime::from_timestamp(t, 0).expect("generated time in range") + chrono::Duration::milliseconds(ms.into()))
        .to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn pretty(v: &Value) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("JSON values serialize")
}

/// Encodes each UTF-8 byte of `s` as its own code point, the way Facebook
/// writes non-ASCII text.
fn lift(s: &str) -> String {
    s.bytes().map(char::from).collect()
}

/// Pretty JSON with every non-ASCII code point written as a `\u` escape.
fn pretty_ascii(v: &Value) -> Vec<u8> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii() {
            out.push(c);
        } else {
            let mut units = [0u16; 2];
            for u in c.encode_utf16(&mut units) {
                out.push_str(&format!("\\u{u:04x}"));
            }
        }
    }
    out.into_bytes()
}

fn js_export(name: &str, v: &Value) -> Vec<u8> {
    let mut out = format!("window.YTD.{name}.part0 = ").into_bytes();
    out.extend(pretty(v));
    out
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn slug(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_lowercase()
}

fn facebook(b: &mut Builder<'_>) {
    let spec = b.spec;
    let v = spec.volume;
    let owner = spec.owner.clone();

    let updates: Vec<Value> = b
        .times_for(v.account_events, Category::Account)
        .into_iter()
        .map(|t| {
            let field = b.pick(ACCOUNT_FIELDS);
            json!({"timestamp": t, "title": format!("Updated {field}")})
        })
        .collect();
    let profile = json!({"profile": {"name": {"full_name": owner}, "profile_updates": updates}});
    b.add(
        "profile_information/profile_information.json",
        pretty_ascii(&profile),
        Category::Account,
        u64::from(v.account_events),
    );

    for (i, (partner, n, span)) in b.conversations().into_iter().enumerate() {
        if n == 0 {
            continue;
        }
        let mut messages: Vec<Value> = b
            .times(n, span)
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let sender = if k % 2 == 0 { &partner } else { &owner };
                let accented = b.rng.random_bool(spec.mojibake_fraction);
                let ms: i64 = b.rng.random_range(0..1000);
                json!({
                    "sender_name": lift(sender),
                    "timestamp_ms": t * 1000 + ms,
                    "content": lift(&b.sentence(accented)),
                })
            })
            .collect();
        messages.reverse();
        let doc = json!({
            "participants": [{"name": lift(&partner)}, {"name": lift(&owner)}],
            "messages": messages,
            "title": lift(&partner),
        });
        let dir = format!("{}_{}{}", slug(&partner), b.token(8), i);
        b.add(
            format!("messages/inbox/{dir}/message_1.json"),
            pretty_ascii(&doc),
            Category::Messages,
            u64::from(n),
        );
    }

    let n_comments = v.posts / 3;
    let n_posts = v.posts - n_comments;
    if n_posts > 0 {
        let posts: Vec<Value> = b
            .times_for(n_posts, Category::PostsAndComments)
            .into_iter()
            .map(|t| json!({"timestamp": t, "data": [{"post": lift(&b.sentence(false))}], "title": lift(&owner)}))
            .collect();
        b.add(
            "posts/your_posts_1.json",
            pretty_ascii(&Value::Array(posts)),
            Category::PostsAndComments,
            n_posts.into(),
        );
    }
    if n_comments > 0 {
        let comments: Vec<Value> = b
            .times_for(n_comments, Category::PostsAndComments)
            .into_iter()
            .map(|t| {
                let author = lift(&owner);
                json!({"timestamp": t, "data": [{"comment": {"comment": lift(&b.sentence(false)), "author": author}}]})
            })
            .collect();
        b.add(
            "comments/comments.json",
            pretty_ascii(&json!({"comments": comments})),
            Category::PostsAndComments,
            n_comments.into(),
        );
    }
    if v.logins > 0 {
        let rows: Vec<Value> = b
            .times_for(v.logins, Category::Security)
            .into_iter()
            .map(|t| {
                let action = if b.rng.random_bool(0.7) { "Login" } else { "Log out" };
                let site = if b.rng.random_bool(0.5) {
                    "www.facebook.com"
                } else {
                    "m.facebook.com"
                };
                json!({"action": action, "timestamp": t, "site": site, "ip_address": b.ip()})
            })
            .collect();
        b.add(
            "security_and_login_information/logins_and_logouts.json",
            pretty_ascii(&json!({"account_accesses": rows})),
            Category::Security,
            v.logins.into(),
        );
    }
    if v.locations > 0 {
        let rows: Vec<Value> = b
            .times_for(v.locations, Category::Location)
            .into_iter()
            .map(|t| {
                let (name, lat, lon) = *PLACES.choose(&mut b.rng).expect("places");
                let (dlat, dlon): (f64, f64) = (b.rng.random_range(-0.05..0.05), b.rng.random_range(-0.05..0.05));
                json!({
                    "name": name,
                    "coordinate": {"latitude": ((lat + dlat) * 1e5).round() / 1e5, "longitude": ((lon + dlon) * 1e5).round() / 1e5},
                    "creation_timestamp": t,
                })
            })
            .collect();
        b.add(
            "location/location_history.json",
            pretty_ascii(&json!({"location_history": rows})),
            Category::Location,
            v.locations.into(),
        );
    }
    if v.searches > 0 {
        let rows: Vec<Value> = b
            .times_for(v.searches, Category::Search)
            .into_iter()
            .map(|t| {
                let q = b.sentence(false).to_lowercase();
                json!({"timestamp": t, "data": [{"text": q}], "title": "You searched Facebook"})
            })
            .collect();
        b.add(
            "search_history/your_search_history.json",
            pretty_ascii(&json!({"searches": rows})),
            Category::Search,
            v.searches.into(),
        );
    }
    if v.contacts > 0 {
        let rows: Vec<Value> = b
            .times_for(v.contacts, Category::Contacts)
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let name = format!("{} {}", b.person_other_than(&owner), i + 1);
                json!({"name": name, "timestamp": t})
            })
            .collect();
        b.add(
            "friends/friends.json",
            pretty_ascii(&json!({"friends": rows})),
            Category::Contacts,
            v.contacts.into(),
        );
    }
    if v.activities > 0 {
        let rows: Vec<Value> = b
            .times_for(v.activities, Category::Activity)
            .into_iter()
            .map(|t| {
                let action = if b.rng.random_bool(0.5) {
                    "Clicked ad"
                } else {
                    "Viewed ad"
                };
                json!({"title": b.pick(ADVERTISERS), "action": action, "timestamp": t})
            })
            .collect();
        b.add(
            "ads_and_businesses/advertisers_you've_interacted_with.json",
            pretty_ascii(&json!({"history": rows})),
            Category::Activity,
            v.activities.into(),
        );
    }
    if v.media_files > 0 {
        let album = format!("{} photos", b.pick(WORDS));
        let folder = format!("photos_and_videos/{}_{}", slug(&album), b.token(6));
        let mut photos = Vec::new();
        for (i, t) in b.times_for(v.media_files, Category::Media).into_iter().enumerate() {
            let uri = format!("{folder}/{}_{}.jpg", b.token(10), i);
            let bytes = b.jpeg(2_000, 24_000);
            b.add_plain(uri.clone(), bytes);
            photos.push(json!({"uri": uri, "creation_timestamp": t, "title": lift(&album)}));
        }
        let doc = json!({"name": lift(&album), "photos": photos});
        b.add(
            "photos_and_videos/album/0.json",
            pretty_ascii(&doc),
            Category::Media,
            v.media_files.into(),
        );
    }
}

fn google(b: &mut Builder<'_>) {
    let spec = b.spec;
    let v = spec.volume;
    let owner = spec.owner.clone();
    b.add_plain(
        "Takeout/archive_browser.html",
        b"<!DOCTYPE html><html><head><title>Google Takeout</title></head><body><h1>Archive overview</h1></body></html>\n"
            .to_vec(),
    );

    let convs = b.conversations();
    let total: u64 = convs.iter().map(|c| u64::from(c.1)).sum();
    if total > 0 {
        let mut conversations = Vec::new();
        for (partner, n, span) in convs {
            let events: Vec<Value> = b
                .times(n, span)
                .into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let sender = if k % 2 == 0 { partner.as_str() } else { owner.as_str() };
                    let us: i64 = b.rng.random_range(0..1_000_000);
                    json!({
                        "sender_name": sender,
                        "timestamp": (t * 1_000_000 + us).to_string(),
                        "chat_message": {"message_content": {"segment": [{"type": "TEXT", "text": b.sentence(false)}]}},
                    })
                })
                .collect();
            conversations.push(json!({
                "conversation": {"conversation": {"id": b.token(12), "name": partner}},
                "events": events,
            }));
        }
        b.add(
            "Takeout/Hangouts/Hangouts.json",
            pretty(&json!({"conversations": conversations})),
            Category::Messages,
            total,
        );
    }
    if v.posts > 0 {
        let rows: Vec<Vec<String>> = b
            .times_for(v.posts, Category::PostsAndComments)
            .into_iter()
            .map(|t| vec![b.token(11), iso(t), b.sentence(false)])
            .collect();
        b.add(
            "Takeout/YouTube and YouTube Music/comments/comments.csv",
            csv_bytes(&["Video ID", "Comment Create Timestamp", "Comment Text"], &rows),
            Category::PostsAndComments,
            v.posts.into(),
        );
    }
    if v.logins > 0 {
        let rows: Vec<Vec<String>> = b
            .times_for(v.logins, Category::Security)
            .into_iter()
            .map(|t| {
                let stamp = DateTime::from_timestamp(t, 0)
                    .expect("in range")
                    .format("%Y-%m-%d %H:%M:%S UTC");
                vec![
                    stamp.to_string(),
                    b.ip(),
                    b.pick(PRODUCTS).to_owned(),
                    b.pick(AGENTS).to_owned(),
                ]
            })
            .collect();
        b.add(
            "Takeout/Access Log Activity/Activities.csv",
            csv_bytes(
                &["Activity Timestamp", "IP Address", "Product Name", "User Agent String"],
                &rows,
            ),
            Category::Security,
            v.logins.into(),
        );
    }
    if v.locations > 0 {
        let (_, mut lat, mut lon) = *PLACES.choose(&mut b.rng).expect("places");
        let rows: Vec<Value> = b
            .times_for(v.locations, Category::Location)
            .into_iter()
            .map(|t| {
                // a slow random walk
                lat += b.rng.random_range(-0.002..0.002);
                lon += b.rng.random_range(-0.002..0.002);
                let ms: i64 = b.rng.random_range(0..1000);
                json!({
                    "latitudeE7": (lat * 1e7).round() as i64,
                    "longitudeE7": (lon * 1e7).round() as i64,
                    "accuracy": b.rng.random_range(3..60),
                    "timestampMs": (t * 1000 + ms).to_string(),
                })
            })
            .collect();
        b.add(
            "Takeout/Location History/Records.json",
            pretty(&json!({"locations": rows})),
            Category::Location,
            v.locations.into(),
        );
    }
    if v.searches > 0 {
        let rows: Vec<Value> = b
            .times_for(v.searches, Category::Search)
            .into_iter()
            .map(|t| {
                let ms = b.rng.random_range(0..1000);
                json!({"header": "Search", "title": format!("Searched for {}", b.sentence(false).to_lowercase()), "time": iso_millis(t, ms), "products": ["Search"]})
            })
            .collect();
        b.add(
            "Takeout/My Activity/Search/MyActivity.json",
            pretty(&Value::Array(rows)),
            Category::Search,
            v.searches.into(),
        );
    }
    if v.contacts > 0 {
        let rows: Vec<Vec<String>> = (0..v.contacts)
            .map(|i| {
                let name = format!("{} {}", b.person_other_than(&owner), i + 1);
                let email = format!("{}{}@example.org", slug(&name), b.rng.random_range(10..99));
                vec![name, email]
            })
            .collect();
        b.add(
            "Takeout/Contacts/contacts.csv",
            csv_bytes(&["Name", "E-mail 1 - Value"], &rows),
            Category::Contacts,
            v.contacts.into(),
        );
    }
    if v.account_events > 0 {
        let rows: Vec<Value> = b
            .times_for(v.account_events, Category::Account)
            .into_iter()
            .map(|t| json!({"timestamp": iso(t), "description": format!("Changed {}", b.pick(ACCOUNT_FIELDS))}))
            .collect();
        b.add(
            "Takeout/Google Account/ChangeHistory.json",
            pretty(&json!({"changes": rows})),
            Category::Account,
            v.account_events.into(),
        );
    }
    if v.activities > 0 {
        let rows: Vec<Value> = b
            .times_for(v.activities, Category::Activity)
            .into_iter()
            .map(|t| {
                let ms = b.rng.random_range(0..1000);
                let title = format!("Watched {}", b.sentence(false).to_lowercase());
                json!({"header": "YouTube", "title": title, "titleUrl": format!("https://www.youtube.com/watch?v={}", b.token(11)), "time": iso_millis(t, ms)})
            })
            .collect();
        b.add(
            "Takeout/YouTube and YouTube Music/history/watch-history.json",
            pretty(&Value::Array(rows)),
            Category::Activity,
            v.activities.into(),
        );
    }
    for (i, t) in b.times_for(v.media_files, Category::Media).into_iter().enumerate() {
        let year = DateTime::from_timestamp(t, 0).expect("in range").year();
        let name = format!("IMG_{:04}.jpg", i + 1);
        let folder = format!("Takeout/Google Photos/Photos from {year}");
        let bytes = b.jpeg(2_000, 24_000);
        b.add_plain(format!("{folder}/{name}"), bytes);
        let meta = json!({
            "title": name,
            "photoTakenTime": {"timestamp": t.to_string(), "formatted": iso(t)},
        });
        b.add(format!("{folder}/{name}.json"), pretty(&meta), Category::Media, 1);
    }
}

fn instagram(b: &mut Builder<'_>) {
    let spec = b.spec;
    let v = spec.volume;
    let owner = spec.owner.clone();
    let handle = slug(&owner);

    let changes: Vec<Value> = b
        .times_for(v.account_events, Category::Account)
        .into_iter()
        .map(|t| {
            let field = b.pick(ACCOUNT_FIELDS);
            json!({"changed": field, "previous_value": b.token(6), "new_value": b.token(8), "change_date": iso(t)})
        })
        .collect();
    b.add(
        "profile.json",
        pretty(&json!({"username": handle, "name": owner, "profile_changes": changes})),
        Category::Account,
        v.account_events.into(),
    );

    let n_followers = v.contacts / 2;
    let mut followers = serde_json::Map::new();
    let mut following = serde_json::Map::new();
    for (i, t) in b.times_for(v.contacts, Category::Contacts).into_iter().enumerate() {
        let user = format!("{}_{}", slug(b.person_other_than(&owner)), i + 1);
        let target = if (i as u32) < n_followers {
            &mut followers
        } else {
            &mut following
        };
        target.insert(user, Value::String(iso(t)));
    }
    b.add(
        "connections.json",
        pretty(&json!({"followers": followers, "following": following})),
        Category::Contacts,
        v.contacts.into(),
    );

    let convs = b.conversations();
    let total: u64 = convs.iter().map(|c| u64::from(c.1)).sum();
    if total > 0 {
        let mut threads = Vec::new();
        for (partner, n, span) in convs {
            let partner_handle = slug(&partner);
            let msgs: Vec<Value> = b
                .times(n, span)
                .into_iter()
                .rev()
                .enumerate()
                .map(|(k, t)| {
                    let sender = if k % 2 == 0 { &partner_handle } else { &handle };
                    json!({"sender": sender, "created_at": iso(t), "text": b.sentence(false)})
                })
                .collect();
            threads.push(json!({"participants": [handle, partner_handle], "conversation": msgs}));
        }
        b.add(
            "messages.json",
            pretty(&Value::Array(threads)),
            Category::Messages,
            total,
        );
    }
    if v.posts > 0 {
        let rows: Vec<Value> = b
            .times_for(v.posts, Category::PostsAndComments)
            .into_iter()
            .map(|t| {
                let author = slug(b.person_other_than(&owner));
                json!([iso(t), b.sentence(false), author])
            })
            .collect();
        b.add(
            "comments.json",
            pretty(&json!({"media_comments": rows})),
            Category::PostsAndComments,
            v.posts.into(),
        );
    }
    if v.logins > 0 {
        let rows: Vec<Value> = b
            .times_for(v.logins, Category::Security)
            .into_iter()
            .map(|t| json!({"ip_address": b.ip(), "timestamp": iso(t), "user_agent": b.pick(AGENTS)}))
            .collect();
        b.add(
            "account_history.json",
            pretty(&json!({"login_history": rows})),
            Category::Security,
            v.logins.into(),
        );
    }
    if v.locations > 0 {
        let rows: Vec<Value> = b
            .times_for(v.locations, Category::Location)
            .into_iter()
            .map(|t| {
                let (name, _, _) = *PLACES.choose(&mut b.rng).expect("places");
                json!({"name": format!("{} {}", name, b.pick(&["Central", "Old Town", "Harbour", "Station"])), "timestamp": iso(t)})
            })
            .collect();
        b.add(
            "locations.json",
            pretty(&json!({"locations": rows})),
            Category::Location,
            v.locations.into(),
        );
    }
    if v.searches > 0 {
        let rows: Vec<Value> = b
            .times_for(v.searches, Category::Search)
            .into_iter()
            .map(|t| json!({"search_click": b.sentence(false).to_lowercase(), "time": iso(t)}))
            .collect();
        b.add(
            "searches.json",
            pretty(&Value::Array(rows)),
            Category::Search,
            v.searches.into(),
        );
    }
    if v.activities > 0 {
        let rows: Vec<Value> = b
            .times_for(v.activities, Category::Activity)
            .into_iter()
            .map(|t| json!([iso(t), slug(b.person_other_than(&owner))]))
            .collect();
        b.add(
            "likes.json",
            pretty(&json!({"media_likes": rows})),
            Category::Activity,
            v.activities.into(),
        );
    }
    if v.media_files > 0 {
        let mut photos = Vec::new();
        for t in b.times_for(v.media_files, Category::Media) {
            let when = DateTime::from_timestamp(t, 0).expect("in range");
            let path = format!("photos/{}/{}.jpg", when.format("%Y%m"), b.token(32));
            let bytes = b.jpeg(2_000, 24_000);
            b.add_plain(path.clone(), bytes);
            photos.push(json!({"caption": b.sentence(false), "taken_at": iso(t), "path": path}));
        }
        b.add(
            "media.json",
            pretty(&json!({"photos": photos})),
            Category::Media,
            v.media_files.into(),
        );
    }
}

fn twitter(b: &mut Builder<'_>) {
    let spec = b.spec;
    let v = spec.volume;
    let owner = spec.owner.clone();
    let handle = slug(&owner);

    let manifest = json!({
        "userInfo": {"userName": handle, "displayName": owner},
        "archiveInfo": {"sizeBytes": "0", "isPartialArchive": false},
    });
    let mut bytes = b"window.__THAR_CONFIG = ".to_vec();
    bytes.extend(pretty(&manifest));
    b.add_plain("data/manifest.js", bytes);

    let tweets: Vec<Value> = b
        .times_for(v.posts, Category::PostsAndComments)
        .into_iter()
        .map(|t| {
            let when = DateTime::from_timestamp(t, 0).expect("in range");
            json!({"tweet": {
                "id_str": b.rng.random_range(10u64.pow(17)..10u64.pow(18)).to_string(),
                "created_at": when.format("%a %b %d %H:%M:%S +0000 %Y").to_string(),
                "full_text": b.sentence(false),
            }})
        })
        .collect();
    b.add(
        "data/tweet.js",
        js_export("tweet", &Value::Array(tweets)),
        Category::PostsAndComments,
        v.posts.into(),
    );

    let convs = b.conversations();
    let total: u64 = convs.iter().map(|c| u64::from(c.1)).sum();
    if total > 0 {
        let mut threads = Vec::new();
        for (partner, n, span) in convs {
            let msgs: Vec<Value> = b
                .times(n, span)
                .into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let sender = if k % 2 == 0 { partner.as_str() } else { owner.as_str() };
                    let ms = b.rng.random_range(0..1000);
                    json!({"messageCreate": {"senderName": sender, "text": b.sentence(false), "createdAt": iso_millis(t, ms)}})
                })
                .collect();
            threads.push(
                json!({"dmConversation": {"conversationId": b.token(16), "partnerName": partner, "messages": msgs}}),
            );
        }
        b.add(
            "data/direct-messages.js",
            js_export("directMessages", &Value::Array(threads)),
            Category::Messages,
            total,
        );
    }
    if v.logins > 0 {
        let rows: Vec<Value> = b
            .times_for(v.logins, Category::Security)
            .into_iter()
            .map(|t| {
                let ms = b.rng.random_range(0..1000);
                json!({"ipAudit": {"accountId": "1", "createdAt": iso_millis(t, ms), "loginIp": b.ip()}})
            })
            .collect();
        b.add(
            "data/ip-audit.js",
            js_export("ipAudit", &Value::Array(rows)),
            Category::Security,
            v.logins.into(),
        );
    }
    if v.locations > 0 {
        let rows: Vec<Value> = b
            .times_for(v.locations, Category::Location)
            .into_iter()
            .map(|t| {
                let (name, _, _) = *PLACES.choose(&mut b.rng).expect("places");
                json!({"location": {"place": name, "createdAt": iso(t)}})
            })
            .collect();
        b.add(
            "data/location-history.js",
            js_export("locationHistory", &Value::Array(rows)),
            Category::Location,
            v.locations.into(),
        );
    }
    if v.searches > 0 {
        let rows: Vec<Value> = (0..v.searches)
            .map(|_| json!({"savedSearch": {"savedSearchId": b.token(10), "query": b.sentence(false).to_lowercase()}}))
            .collect();
        b.add(
            "data/saved-search.js",
            js_export("savedSearch", &Value::Array(rows)),
            Category::Search,
            v.searches.into(),
        );
    }
    let n_followers = v.contacts / 2;
    let n_following = v.contacts - n_followers;
    for (file, key, n) in [
        ("follower", "follower", n_followers),
        ("following", "following", n_following),
    ] {
        if n == 0 {
            continue;
        }
        let rows: Vec<Value> = (0..n)
            .map(|i| json!({key: {"accountId": b.token(9), "userName": format!("{}_{}", slug(b.person_other_than(&owner)), i + 1)}}))
            .collect();
        b.add(
            format!("data/{file}.js"),
            js_export(key, &Value::Array(rows)),
            Category::Contacts,
            n.into(),
        );
    }
    if v.account_events > 0 {
        let mut current = handle.clone();
        let rows: Vec<Value> = b
            .times_for(v.account_events, Category::Account)
            .into_iter()
            .map(|t| {
                let next = format!("{handle}_{}", b.token(4));
                let row = json!({"screenNameChange": {"accountId": "1", "changedAt": iso(t), "screenNameChange": {"changedFrom": current, "changedTo": next}}});
                current = next;
                row
            })
            .collect();
        b.add(
            "data/screen-name-change.js",
            js_export("screenNameChange", &Value::Array(rows)),
            Category::Account,
            v.account_events.into(),
        );
    }
    if v.activities > 0 {
        let impressions: Vec<Value> = b
            .times_for(v.activities, Category::Activity)
            .into_iter()
            .map(|t| json!({"impressionTime": iso(t), "advertiserInfo": {"advertiserName": b.pick(ADVERTISERS)}}))
            .collect();
        let doc = json!([{"ad": {"adsUserData": {"adImpressions": {"impressions": impressions}}}}]);
        b.add(
            "data/ad-impressions.js",
            js_export("adImpressions", &doc),
            Category::Activity,
            v.activities.into(),
        );
    }
    if v.media_files > 0 {
        let mut rows = Vec::new();
        for t in b.times_for(v.media_files, Category::Media) {
            let name = format!(
                "{}-{}.jpg",
                b.rng.random_range(10u64.pow(17)..10u64.pow(18)),
                b.token(8)
            );
            let bytes = b.jpeg(2_000, 24_000);
            b.add_plain(format!("data/tweet_media/{name}"), bytes);
            rows.push(json!({"media": {"createdAt": iso(t), "mediaUrl": format!("https://pbs.example.invalid/media/{name}")}}));
        }
        b.add(
            "data/media.js",
            js_export("media", &Value::Array(rows)),
            Category::Media,
            v.media_files.into(),
        );
    }
}

/// Builds the archive for `spec` and the manifest of what parsing it must
/// yield.
pub fn generate(spec: &FixtureSpec) -> Result<(Vec<u8>, Manifest), FixtureError> {
    spec.validate()?;
    let mut b = Builder::new(spec);
    match spec.service.as_str() {
        "facebook" => facebook(&mut b),
        "google" => google(&mut b),
        "instagram" => instagram(&mut b),
        "twitter" => twitter(&mut b),
        other => return Err(FixtureError::UnsupportedService(other.to_owned())),
    }
    b.finish()
}

/// Scenario presets: `use-case-1` is one archive, `use-case-2` four.
pub fn preset(name: &str) -> Result<Vec<(String, FixtureSpec)>, FixtureError> {
    match name {
        "use-case-1" => Ok(vec![("uc1-bob-facebook".to_owned(), use_case_1())]),
        "use-case-2" => Ok(use_case_2()),
        other => Err(FixtureError::UnknownPreset(other.to_owned())),
    }
}

pub const PRESETS: [&str; 2] = ["use-case-1", "use-case-2"];

/// Bob's Facebook export: a dozen ordinary chats plus one long
/// conversation with Alice concentrated around 2011, and many photos.
pub fn use_case_1() -> FixtureSpec {
    let mut spec = FixtureSpec::new(
        "facebook",
        2011,
        Volume {
            conversations: 12,
            messages_per_conversation: 40,
            posts: 90,
            logins: 60,
            locations: 40,
            searches: 50,
            media_files: 60,
            contacts: 120,
            activities: 30,
            account_events: 6,
        },
        TimeSpan::years(2008, 2019),
    );
    spec.owner = "Bob".into();
    spec.highlight = Some(Highlight {
        partner: "Alice".into(),
        messages: 1500,
        time_span: TimeSpan {
            start: Utc.with_ymd_and_hms(2010, 9, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2011, 12, 31, 23, 59, 59).unwrap(),
        },
    });
    spec
}

/// Alice and Bob, each with a Facebook and a Google export. Alice mostly
/// messages on Facebook and barely uses Google after 2015; Bob's Google
/// account tracks his location constantly from 2014 on.
pub fn use_case_2() -> Vec<(String, FixtureSpec)> {
    let security_since_2016 = |spec: &mut FixtureSpec| {
        spec.category_spans
            .insert(Category::Security, TimeSpan::years(2016, 2019));
    };

    let mut alice_fb = FixtureSpec::new(
        "facebook",
        5201,
        Volume {
            conversations: 10,
            messages_per_conversation: 180,
            posts: 40,
            logins: 80,
            locations: 10,
            searches: 30,
            media_files: 20,
            contacts: 150,
            activities: 20,
            account_events: 5,
        },
        TimeSpan::years(2010, 2019),
    );
    alice_fb.owner = "Alice".into();
    security_since_2016(&mut alice_fb);

    let mut alice_google = FixtureSpec::new(
        "google",
        5202,
        Volume {
            conversations: 3,
            messages_per_conversation: 40,
            posts: 10,
            logins: 20,
            locations: 0,
            searches: 30,
            media_files: 5,
            contacts: 40,
            activities: 150,
            account_events: 3,
        },
        TimeSpan::years(2012, 2019),
    );
    alice_google.owner = "Alice".into();
    for c in [Category::Messages, Category::Activity] {
        alice_google.category_spans.insert(c, TimeSpan::years(2015, 2015));
    }

    let mut bob_fb = FixtureSpec::new(
        "facebook",
        5203,
        Volume {
            conversations: 4,
            messages_per_conversation: 30,
            posts: 150,
            logins: 80,
            locations: 60,
            searches: 80,
            media_files: 40,
            contacts: 90,
            activities: 60,
            account_events: 5,
        },
        TimeSpan::years(2010, 2019),
    );
    bob_fb.owner = "Bob".into();
    security_since_2016(&mut bob_fb);

    let mut bob_google = FixtureSpec::new(
        "google",
        5204,
        Volume {
            conversations: 2,
            messages_per_conversation: 30,
            posts: 20,
            logins: 60,
            locations: 4000,
            searches: 300,
            media_files: 30,
            contacts: 60,
            activities: 1500,
            account_events: 5,
        },
        TimeSpan::years(2012, 2019),
    );
    bob_google.owner = "Bob".into();
    bob_google
        .category_spans
        .insert(Category::Location, TimeSpan::years(2014, 2019));

    vec![
        ("uc2-alice-facebook".into(), alice_fb),
        ("uc2-alice-google".into(), alice_google),
        ("uc2-bob-facebook".into(), bob_fb),
        ("uc2-bob-google".into(), bob_google),
    ]
}

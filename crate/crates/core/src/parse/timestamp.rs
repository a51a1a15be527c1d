use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Deserializer};
use serde_json::Value;

/// Epoch values at or above this magnitude are read as milliseconds.
pub const EPOCH_MILLIS_THRESHOLD: f64 = 1e11;

/// How a rule's time field is encoded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TimeHint {
    /// Epoch seconds or milliseconds by magnitude, else ISO 8601.
    #[default]
    Auto,
    EpochSeconds,
    EpochMillis,
    EpochMicros,
    Iso8601,
    /// A chrono `strftime` pattern; must carry a zone offset or is read as UTC.
    Pattern(String),
}

impl FromStr for TimeHint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "auto" => TimeHint::Auto,
            "epoch_s" => TimeHint::EpochSeconds,
            "epoch_ms" => TimeHint::EpochMillis,
            "epoch_us" => TimeHint::EpochMicros,
            "iso8601" => TimeHint::Iso8601,
            other => match other.strip_prefix("pattern:") {
                Some(p) if !p.is_empty() => TimeHint::Pattern(p.to_owned()),
                _ => return Err(format!("unknown time format {other:?}")),
            },
        })
    }
}

impl fmt::Display for TimeHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeHint::Auto => f.write_str("auto"),
            TimeHint::EpochSeconds => f.write_str("epoch_s"),
            TimeHint::EpochMillis => f.write_str("epoch_ms"),
            TimeHint::EpochMicros => f.write_str("epoch_us"),
            TimeHint::Iso8601 => f.write_str("iso8601"),
            TimeHint::Pattern(p) => write!(f, "pattern:{p}"),
        }
    }
}

impl<'de> Deserialize<'de> for TimeHint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn numeric(raw: &Value) -> Option<f64> {
    match raw {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let s = s.trim();
            let looks_numeric = !s.is_empty()
                && s.trim_start_matches('-')
                    .chars()
                    .all(|c| c.is_ascii_digit() || c == '.');
            if looks_numeric {
                s.parse().ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

fn from_epoch(value: f64, units_per_second: f64) -> Option<DateTime<Utc>> {
    if !value.is_finite() {
        return None;
    }
    let secs = (value / units_per_second).floor();
    if secs.abs() > 1e13 {
        return None;
    }
    DateTime::from_timestamp(secs as i64, 0)
}

fn truncate(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(t.timestamp(), 0).unwrap_or(t)
}

fn parse_iso(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(truncate(t.with_timezone(&Utc)));
    }
    let (body, explicit_utc) = match s.strip_suffix(" UTC").or_else(|| s.strip_suffix('Z')) {
        Some(b) => (b.trim_end(), true),
        None => (s, false),
    };
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(body, fmt) {
            return Some(truncate(t.and_utc()));
        }
    }
    if !explicit_utc {
        for fmt in ["%Y-%m-%d %H:%M:%S%.f %z", "%Y-%m-%dT%H:%M:%S%.f%z"] {
            if let Ok(t) = DateTime::parse_from_str(body, fmt) {
                return Some(truncate(t.with_timezone(&Utc)));
            }
        }
    }
    NaiveDate::parse_from_str(body, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

fn parse_pattern(s: &str, pattern: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_str(s.trim(), pattern)
        .map(|t| t.with_timezone(&Utc))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), pattern).map(|t| t.and_utc()))
        .ok()
        .map(truncate)
}

/// Normalizes a raw time value to a UTC instant with second precision.
/// Returns `None` for anything unparseable; never fails.
pub fn parse_timestamp(raw: &Value, hint: &TimeHint) -> Option<DateTime<Utc>> {
    match hint {
        TimeHint::Auto => match numeric(raw) {
            Some(n) if n.abs() >= EPOCH_MILLIS_THRESHOLD => from_epoch(n, 1e3),
            Some(n) => from_epoch(n, 1.0),
            None => raw.as_str().and_then(parse_iso),
        },
        TimeHint::EpochSeconds => numeric(raw).and_then(|n| from_epoch(n, 1.0)),
        TimeHint::EpochMillis => numeric(raw).and_then(|n| from_epoch(n, 1e3)),
        TimeHint::EpochMicros => numeric(raw).and_then(|n| from_epoch(n, 1e6)),
        TimeHint::Iso8601 => raw.as_str().and_then(parse_iso),
        TimeHint::Pattern(p) => raw.as_str().and_then(|s| parse_pattern(s, p)),
    }
}

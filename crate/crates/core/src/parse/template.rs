//! Field references and text templates used by parser rules.
//!
//! A reference names a JSON value relative to one of several scopes:
//!
//! | syntax      | value                                                   |
//! |-------------|---------------------------------------------------------|
//! | `/a/0`      | pointer into the current record                         |
//! | `@`         | the record itself                                       |
//! | `$/a`       | pointer into the document root (`$` alone: the root)    |
//! | `^N/a`      | pointer into the value matched by the N-th `*` of the records path |
//! | `#N`        | key or index matched by the N-th `*`                    |
//!
//! Templates embed references in braces, optionally followed by a filter:
//! `{/sender_name} says: "{/content}"`, `{/latitudeE7|e7}`. Literal braces
//! are written `{{` and `}}`.

use std::borrow::Cow;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Record,
    Root,
    Wildcard(usize),
    Key(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub scope: Scope,
    /// RFC 6901 pointer; empty means the scope value itself.
    pub pointer: String,
}

/// One enumerated record with the bindings of the records-path wildcards.
#[derive(Debug, Clone)]
pub struct RecordContext<'a> {
    pub root: &'a Value,
    pub record: &'a Value,
    /// `(key, matched value)` per `*` segment, outermost first.
    pub bindings: Vec<(Cow<'a, str>, &'a Value)>,
}

fn parse_index(s: &str, what: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("expected a wildcard index after {what:?}"))
}

impl Reference {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (scope, pointer) = if s == "@" {
            (Scope::Record, "")
        } else if s.is_empty() || s.starts_with('/') {
            (Scope::Record, s)
        } else if let Some(rest) = s.strip_prefix('$') {
            (Scope::Root, rest)
        } else if let Some(rest) = s.strip_prefix('^') {
            let split = rest.find('/').unwrap_or(rest.len());
            (Scope::Wildcard(parse_index(&rest[..split], "^")?), &rest[split..])
        } else if let Some(rest) = s.strip_prefix('#') {
            (Scope::Key(parse_index(rest, "#")?), "")
        } else {
            return Err(format!("reference {s:?} must start with '/', '@', '$', '^' or '#'"));
        };
        if !(pointer.is_empty() || pointer.starts_with('/')) {
            return Err(format!("pointer in reference {s:?} must start with '/'"));
        }
        Ok(Reference {
            scope,
            pointer: pointer.to_owned(),
        })
    }

    /// Highest wildcard index this reference needs, if any.
    pub fn wildcard_index(&self) -> Option<usize> {
        match self.scope {
            Scope::Wildcard(n) | Scope::Key(n) => Some(n),
            _ => None,
        }
    }

    pub fn resolve<'a>(&self, ctx: &RecordContext<'a>) -> Option<Cow<'a, Value>> {
        let base = match self.scope {
            Scope::Record => ctx.record,
            Scope::Root => ctx.root,
            Scope::Wildcard(n) => ctx.bindings.get(n)?.1,
            Scope::Key(n) => {
                let key = &ctx.bindings.get(n)?.0;
                return Some(Cow::Owned(Value::String(key.to_string())));
            }
        };
        base.pointer(&self.pointer).map(Cow::Borrowed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    /// Integer degrees·10⁷ to decimal degrees.
    E7,
    Trim,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Field(Reference, Option<Filter>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

/// Renders a JSON value as element text.
pub fn value_text(v: &Value) -> Cow<'_, str> {
    match v {
        Value::Null => Cow::Borrowed(""),
        Value::String(s) => Cow::Borrowed(s),
        Value::Bool(b) => Cow::Owned(b.to_string()),
        Value::Number(n) => Cow::Owned(n.to_string()),
        other => Cow::Owned(other.to_string()),
    }
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = source.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                '{' if chars.peek().map(|p| p.1) == Some('{') => {
                    chars.next();
                    literal.push('{');
                }
                '}' if chars.peek().map(|p| p.1) == Some('}') => {
                    chars.next();
                    literal.push('}');
                }
                '{' => {
                    let end = source[i..]
                        .find('}')
                        .map(|j| i + j)
                        .ok_or_else(|| format!("unclosed '{{' in template {source:?}"))?;
                    let inner = &source[i + 1..end];
                    let (reference, filter) = match inner.split_once('|') {
                        Some((r, f)) => (r, Some(f.trim())),
                        None => (inner, None),
                    };
                    let filter = match filter {
                        None => None,
                        Some("e7") => Some(Filter::E7),
                        Some("trim") => Some(Filter::Trim),
                        Some(other) => return Err(format!("unknown template filter {other:?}")),
                    };
                    if reference.trim().is_empty() {
                        return Err(format!("empty placeholder in template {source:?}"));
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Field(Reference::parse(reference)?, filter));
                    while chars.peek().is_some_and(|&(j, _)| j <= end) {
                        chars.next();
                    }
                }
                '}' => return Err(format!("unmatched '}}' in template {source:?}")),
                c => literal.push(c),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template {
            source: source.to_owned(),
            segments,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn references(&self) -> impl Iterator<Item = &Reference> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Field(r, _) => Some(r),
            Segment::Literal(_) => None,
        })
    }

    /// Renders the template; `fix` post-processes every substituted string.
    /// Missing values render as empty strings.
    pub fn render(&self, ctx: &RecordContext<'_>, fix: &dyn Fn(&str) -> String) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Field(r, filter) => {
                    let Some(value) = r.resolve(ctx) else { continue };
                    let text = value_text(&value);
                    match filter {
                        Some(Filter::E7) => match value.as_f64().or_else(|| text.trim().parse().ok()) {
                            Some(n) => out.push_str(&format!("{:.5}", n / 1e7)),
                            None => out.push_str(&fix(&text)),
                        },
                        Some(Filter::Trim) => out.push_str(fix(&text).trim()),
                        None => out.push_str(&fix(&text)),
                    }
                }
            }
        }
        out
    }
}

/// Parsed records path: literal pointer tokens and `*` wildcards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordsPath {
    segments: Vec<Option<String>>,
}

fn unescape_token(t: &str) -> String {
    t.replace("~1", "/").replace("~0", "~")
}

impl RecordsPath {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.is_empty() {
            return Ok(RecordsPath { segments: vec![] });
        }
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| format!("records path {s:?} must be empty or start with '/'"))?;
        Ok(RecordsPath {
            segments: rest.split('/').map(|t| (t != "*").then(|| unescape_token(t))).collect(),
        })
    }

    pub fn wildcards(&self) -> usize {
        self.segments.iter().filter(|s| s.is_none()).count()
    }

    /// Whether the literal prefix before the first wildcard exists in `root`.
    pub fn prefix_exists(&self, root: &Value) -> bool {
        let mut cur = root;
        for seg in &self.segments {
            match seg {
                None => return true,
                Some(tok) => match step(cur, tok) {
                    Some(next) => cur = next,
                    None => return false,
                },
            }
        }
        true
    }

    /// Enumerates every record reachable through the path, in document order.
    pub fn records<'a>(&self, root: &'a Value) -> Vec<RecordContext<'a>> {
        let mut out = Vec::new();
        self.walk(root, root, 0, &mut Vec::new(), &mut out);
        out
    }

    fn walk<'a>(
        &self,
        root: &'a Value,
        cur: &'a Value,
        depth: usize,
        bindings: &mut Vec<(Cow<'a, str>, &'a Value)>,
        out: &mut Vec<RecordContext<'a>>,
    ) {
        let Some(seg) = self.segments.get(depth) else {
            out.push(RecordContext {
                root,
                record: cur,
                bindings: bindings.clone(),
            });
            return;
        };
        match seg {
            Some(tok) => {
                if let Some(next) = step(cur, tok) {
                    self.walk(root, next, depth + 1, bindings, out);
                }
            }
            None => match cur {
                Value::Array(items) => {
                    for (i, item) in items.iter().enumerate() {
                        bindings.push((Cow::Owned(i.to_string()), item));
                        self.walk(root, item, depth + 1, bindings, out);
                        bindings.pop();
                    }
                }
                Value::Object(map) => {
                    for (k, item) in map {
                        bindings.push((Cow::Borrowed(k.as_str()), item));
                        self.walk(root, item, depth + 1, bindings, out);
                        bindings.pop();
                    }
                }
                _ => {}
            },
        }
    }
}

fn step<'a>(v: &'a Value, tok: &str) -> Option<&'a Value> {
    match v {
        Value::Object(m) => m.get(tok),
        Value::Array(a) => tok.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    }
}

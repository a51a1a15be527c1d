//! Repairs for the wrapping and encoding quirks found in export files.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WrapperError {
    #[error("no `name = value` assignment found")]
    NoAssignment,
    #[error("left side of the assignment is not a dotted identifier: {0:?}")]
    BadTarget(String),
    #[error("assigned value is not valid JSON: {0}")]
    InvalidJson(String),
}

fn is_dotted_identifier(s: &str) -> bool {
    let s = s
        .strip_prefix("var ")
        .or_else(|| s.strip_prefix("let "))
        .or_else(|| s.strip_prefix("const "))
        .unwrap_or(s)
        .trim();
    !s.is_empty()
        && s.split('.').all(|part| {
            let mut chars = part.chars();
            chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
                && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        })
}

/// Extracts the JSON literal from a `window.YTD.x.part0 = [...]` style
/// script: everything after the first top-level `=`, trimmed, with one
/// trailing semicolon removed.
pub fn unwrap_js_export(content: &str) -> Result<&str, WrapperError> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    // The target precedes any literal, so the first '=' before a bracket or
    // quote is the top-level one.
    let eq = content
        .find(['=', '[', '{', '"'])
        .filter(|&i| content.as_bytes()[i] == b'=')
        .ok_or(WrapperError::NoAssignment)?;
    let target = content[..eq].trim();
    if !is_dotted_identifier(target) {
        return Err(WrapperError::BadTarget(target.to_owned()));
    }
    let mut value = content[eq + 1..].trim();
    if let Some(v) = value.strip_suffix(';') {
        value = v.trim_end();
    }
    serde_json::from_str::<serde::de::IgnoredAny>(value).map_err(|e| WrapperError::InvalidJson(e.to_string()))?;
    Ok(value)
}

/// One repair step: reinterpret a string of sub-256 code points as UTF-8
/// bytes when that decodes to something different.
fn repair_once(s: &str) -> Option<String> {
    let mut bytes = Vec::with_capacity(s.len());
    for c in s.chars() {
        let cp = u32::from(c);
        if cp >= 256 {
            return None;
        }
        bytes.push(cp as u8);
    }
    // Pure ASCII decodes to itself.
    if bytes.is_ascii() {
        return None;
    }
    String::from_utf8(bytes).ok()
}

/// Undoes UTF-8 text that was decoded as Latin-1 (possibly repeatedly).
///
/// Each round applies only when every character is below U+0100 and the
/// resulting bytes are valid UTF-8. Rounds repeat until nothing changes,
/// so the result is a fixpoint and the function is idempotent.
pub fn repair_mojibake(s: &str) -> String {
    let mut current = match repair_once(s) {
        Some(fixed) => fixed,
        None => return s.to_owned(),
    };
    // Every successful round shortens the string, so this terminates.
    while let Some(next) = repair_once(&current) {
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Oracle: UTF-8 bytes of `s`, each lifted to the code point of equal value.
    fn lift(s: &str) -> String {
        s.bytes().map(char::from).collect()
    }

    #[test]
    fn unwrap_examples() {
        let got = unwrap_js_export(r#"window.YTD.tweet.part0 = [ {"a":1} ]"#).unwrap();
        assert_eq!(got, r#"[ {"a":1} ]"#);
        let parsed: serde_json::Value = serde_json::from_str(got).unwrap();
        assert_eq!(parsed, serde_json::json!([{"a": 1}]));

        assert_eq!(unwrap_js_export(r#"x = {"k":"v"};"#).unwrap(), r#"{"k":"v"}"#);
        assert_eq!(unwrap_js_export("[1,2]"), Err(WrapperError::NoAssignment));
    }

    #[test]
    fn unwrap_rejects_bad_inputs() {
        assert_eq!(unwrap_js_export(""), Err(WrapperError::NoAssignment));
        assert!(matches!(unwrap_js_export("a b = [1]"), Err(WrapperError::BadTarget(_))));
        assert!(matches!(
            unwrap_js_export("window.x = [1,"),
            Err(WrapperError::InvalidJson(_))
        ));
        assert!(matches!(unwrap_js_export("f(1) = 3"), Err(WrapperError::BadTarget(_))));
        // an '=' inside the literal is not the assignment
        assert_eq!(unwrap_js_export(r#"["a=b"]"#), Err(WrapperError::NoAssignment));
    }

    #[test]
    fn unwrap_handles_bom_and_declarations() {
        assert_eq!(unwrap_js_export("\u{feff}window.a = {}").unwrap(), "{}");
        assert_eq!(unwrap_js_export("var cfg = 3 ;").unwrap(), "3");
        assert_eq!(
            unwrap_js_export("window.x = {\"s\": \"a = b\"}\n").unwrap(),
            "{\"s\": \"a = b\"}"
        );
    }

    #[test]
    fn golden_repairs() {
        assert_eq!(repair_mojibake("café"), "café");
        assert_eq!(repair_mojibake("\u{00C3}\u{00A9}"), "é");
        assert_eq!(lift("é"), "\u{00C3}\u{00A9}");
        assert_eq!(repair_mojibake("\u{00F0}\u{009F}\u{0098}\u{0080}"), "😀");
        assert_eq!(lift("😀"), "\u{00F0}\u{009F}\u{0098}\u{0080}");
        assert_eq!(repair_mojibake("plain ascii"), "plain ascii");
        assert_eq!(repair_mojibake(""), "");
    }

    #[test]
    fn double_encoding_is_fully_repaired() {
        let twice = lift(&lift("Grüße"));
        assert_eq!(repair_mojibake(&twice), "Grüße");
    }

    #[test]
    fn invalid_utf8_lift_is_left_alone() {
        // "Ã(" is 0xC3 0x28, not valid UTF-8
        assert_eq!(repair_mojibake("Ã("), "Ã(");
    }

    proptest! {
        #[test]
        fn idempotent(s in any::<String>()) {
            let once = repair_mojibake(&s);
            prop_assert_eq!(repair_mojibake(&once), once);
        }

        #[test]
        fn lift_round_trip(t in any::<String>()) {
            let lifted = lift(&t);
            prop_assume!(t.chars().any(|c| u32::from(c) >= 128));
            prop_assume!(lifted != t);
            // t must itself be a fixpoint, i.e. not already mojibake.
            prop_assume!(repair_mojibake(&t) == t);
            prop_assert_eq!(repair_mojibake(&lifted), t);
        }
    }
}

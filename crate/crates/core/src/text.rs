//! Shared text utilities: surface-form normalization, word tokenization,
//! token bags and timestamp parsing.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use regex::Regex;

/// Token multiset. Ordered so iteration (and anything serialized from it)
/// is deterministic.
pub type TokenBag = BTreeMap<String, u64>;

/// Lowercases and collapses runs of whitespace to a single space.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercase alphanumeric words of `text`.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn bag<I, S>(tokens: I) -> TokenBag
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut out = TokenBag::new();
    for t in tokens {
        *out.entry(t.into()).or_insert(0) += 1;
    }
    out
}

/// Multiset difference `new - old`, clamped at zero.
pub fn added_tokens(old: &TokenBag, new: &TokenBag) -> TokenBag {
    new.iter()
        .filter_map(|(w, &n)| {
            let before = old.get(w).copied().unwrap_or(0);
            (n > before).then(|| (w.clone(), n - before))
        })
        .collect()
}

pub fn merge_into(acc: &mut TokenBag, other: &TokenBag) {
    for (w, &n) in other {
        *acc.entry(w.clone()).or_insert(0) += n;
    }
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#([\p{L}\p{N}_]+)").unwrap())
}

/// Distinct hashtags of `text`, lowercased without the `#`, in order of first
/// appearance.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for cap in hashtag_re().captures_iter(text) {
        let tag = cap[1].to_lowercase();
        if !out.contains(&tag) {
            out.push(tag);
        }
    }
    out
}

/// Accepts epoch seconds (number or numeric string), RFC 3339 instants,
/// naive `YYYY-MM-DD[T ]HH:MM:SS` (read as UTC) and bare dates.
pub fn parse_timestamp(value: &serde_json::Value) -> Option<DateTime<Utc>> {
    match value {
        serde_json::Value::Number(n) => {
            let secs = n.as_i64().or_else(|| n.as_f64().map(|f| f as i64))?;
            Utc.timestamp_opt(secs, 0).single()
        }
        serde_json::Value::String(s) => parse_timestamp_str(s),
        _ => None,
    }
}

pub fn parse_timestamp_str(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Utc.timestamp_opt(secs, 0).single();
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn normalizes_surface_forms() {
        assert_eq!(normalize_surface("  Sochi\t 2014 "), "sochi 2014");
        assert_eq!(normalize_surface("ÉCOLE Normale"), "école normale");
    }

    #[test]
    fn hashtags_are_lowercased_and_stripped() {
        assert_eq!(extract_hashtags("Go #Sochi2014!"), vec!["sochi2014"]);
        assert_eq!(extract_hashtags("#a #b #A"), vec!["a", "b"]);
        assert!(extract_hashtags("no tags # here").is_empty());
    }

    #[test]
    fn multiset_difference() {
        let old = bag(["a", "b"]);
        let new = bag(["a", "b", "c", "c"]);
        assert_eq!(added_tokens(&old, &new), bag(["c", "c"]));
        assert!(added_tokens(&new, &old).is_empty());
    }

    #[test]
    fn timestamps() {
        let day = |v| parse_timestamp(&v).unwrap().date_naive().to_string();
        assert_eq!(day(json!(1391212800)), "2014-02-01");
        assert_eq!(day(json!("2014-02-01T23:59:59Z")), "2014-02-01");
        assert_eq!(day(json!("2014-02-01T23:30:00-02:00")), "2014-02-02");
        assert_eq!(day(json!("2014-02-01")), "2014-02-01");
        assert!(parse_timestamp(&json!("yesterday")).is_none());
        assert!(parse_timestamp(&json!(null)).is_none());
    }
}

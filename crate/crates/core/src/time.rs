//! Timestamp literals as seconds since the Unix epoch (UTC).

use chrono::{DateTime, NaiveDate, NaiveDateTime};

/// Year assumed for month-day literals such as `Nov-11 0:00`.
pub const DEFAULT_YEAR: i32 = 2019;

const DATETIME_FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

/// Parses ISO-8601 / RFC 3339 date-times, bare ISO dates, and month-day
/// forms (`Nov-11`, `Nov-11 0:00`, `Nov-01 10:20:05`) using `default_year`.
pub fn parse_timestamp(text: &str, default_year: i32) -> Option<f64> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.timestamp() as f64);
    }
    for f in DATETIME_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, f) {
            return Some(t.and_utc().timestamp() as f64);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
    }
    if !text.as_bytes().first()?.is_ascii_alphabetic() {
        return None;
    }
    let dated = format!("{default_year}-{text}");
    for f in ["%Y-%b-%d %H:%M", "%Y-%b-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(&dated, f) {
            return Some(t.and_utc().timestamp() as f64);
        }
    }
    NaiveDate::parse_from_str(&dated, "%Y-%b-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|t| t.and_utc().timestamp() as f64)
}

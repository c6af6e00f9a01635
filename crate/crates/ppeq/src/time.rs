//! ISO-8601 timestamps at minute resolution.

use chrono::{DateTime, NaiveDateTime, Utc};
use ppeq_core::Timestamp;

const NAIVE_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

/// Parses an RFC 3339 timestamp, or a naive `YYYY-MM-DD[T ]HH:MM[:SS]` taken
/// as UTC. Seconds are truncated to the minute.
pub fn parse_timestamp(s: &str) -> Result<Timestamp, String> {
    let s = s.trim();
    let seconds = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.timestamp()
    } else {
        NAIVE_FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .map(|dt| dt.and_utc().timestamp())
            .ok_or_else(|| format!("`{s}` is not an ISO-8601 timestamp"))?
    };
    Ok(Timestamp(seconds.div_euclid(60)))
}

/// `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(t.0 * 60, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| format!("{}min", t.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_round_trip() {
        let t = parse_timestamp("2020-01-01T09:30:00Z").unwrap();
        assert_eq!(t.0, 26_297_280 + 9 * 60 + 30);
        assert_eq!(format_timestamp(t), "2020-01-01T09:30:00Z");
        assert_eq!(parse_timestamp("2020-01-01 09:30").unwrap(), t);
        assert_eq!(parse_timestamp("2020-01-01T10:30:59+01:00").unwrap(), t);
        assert!(parse_timestamp("yesterday").is_err());
    }
}

//! Timestamp parsing and formatting shared by every file format.

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc};

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Parses an ISO 8601 timestamp. Offsets are normalised to UTC and naive
/// timestamps are taken to be UTC already.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    // Offsets without a colon, e.g. +0100.
    if let Ok(dt) = DateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(dt) = DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f%z") {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in NAIVE_FORMATS {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| Utc.from_utc_datetime(&naive))
}

/// Canonical output form: RFC 3339 with a `Z` suffix.
pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Truncates `ts` down to a multiple of `interval` counted from the Unix epoch.
pub fn truncate(ts: DateTime<Utc>, interval: Duration) -> DateTime<Utc> {
    let step = interval.num_milliseconds();
    let ms = ts.timestamp_millis();
    let floored = ms.div_euclid(step) * step;
    DateTime::from_timestamp_millis(floored).expect("truncated timestamp in range")
}

pub(crate) mod serde_ts {
    use super::{format_timestamp, parse_timestamp};
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).ok_or_else(|| D::Error::custom(format!("bad timestamp {raw:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_zoned_and_naive() {
        let z = parse_timestamp("2023-01-01T00:05:00Z").unwrap();
        let naive = parse_timestamp("2023-01-01 00:05:00").unwrap();
        let offset = parse_timestamp("2023-01-01T01:05:00+01:00").unwrap();
        assert_eq!(z, naive);
        assert_eq!(z, offset);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn truncates_to_interval() {
        let ts = parse_timestamp("2023-01-01T10:47:13Z").unwrap();
        let hour = truncate(ts, Duration::hours(1));
        assert_eq!(format_timestamp(hour), "2023-01-01T10:00:00Z");
        let quarter = truncate(ts, Duration::minutes(15));
        assert_eq!(format_timestamp(quarter), "2023-01-01T10:45:00Z");
    }
}

//! UTC timestamps with millisecond precision.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Integers with an absolute value below this are epoch seconds, above it
/// epoch milliseconds.
pub const EPOCH_MILLIS_THRESHOLD: i64 = 100_000_000_000;

/// Milliseconds since the Unix epoch, UTC.
///
/// Rendered canonically as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable timestamp {0:?}")]
pub struct TimestampError(pub String);

impl Timestamp {
    pub const EPOCH: Timestamp = Timestamp(0);

    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0.saturating_add(ms))
    }

    fn to_datetime(self) -> Option<DateTime<Utc>> {
        Utc.timestamp_millis_opt(self.0).single()
    }

    /// Parses ISO-8601 / RFC 3339 text, the common `YYYY-MM-DD HH:MM:SS`
    /// variants (taken as UTC), bare dates and integer epoch values.
    pub fn parse(text: &str) -> Result<Self, TimestampError> {
        Self::parse_with(text, None)
    }

    /// Like [`Timestamp::parse`] but tries an explicit `strftime` format
    /// first. Formats without an offset are interpreted as UTC.
    pub fn parse_with(text: &str, format: Option<&str>) -> Result<Self, TimestampError> {
        let s = text.trim();
        let err = || TimestampError(text.to_string());
        if s.is_empty() {
            return Err(err());
        }
        if let Some(fmt) = format {
            if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(dt.timestamp_millis()));
            }
            if let Ok(ndt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(ndt.and_utc().timestamp_millis()));
            }
            if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
                return Ok(Timestamp(d.and_hms_opt(0, 0, 0).ok_or_else(err)?.and_utc().timestamp_millis()));
            }
        }
        if let Ok(n) = s.parse::<i64>() {
            return Ok(Timestamp(if n.abs() < EPOCH_MILLIS_THRESHOLD {
                n.checked_mul(1000).ok_or_else(err)?
            } else {
                n
            }));
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp(dt.timestamp_millis()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(ndt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(ndt.and_utc().timestamp_millis()));
            }
        }
        for fmt in ["%Y-%m-%d %H:%M:%S%.f%#z", "%Y-%m-%dT%H:%M:%S%.f%#z"] {
            if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(dt.timestamp_millis()));
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Timestamp(d.and_hms_opt(0, 0, 0).ok_or_else(err)?.and_utc().timestamp_millis()));
        }
        Err(err())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_datetime() {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.3fZ")),
            None => write!(f, "{}", self.0),
        }
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

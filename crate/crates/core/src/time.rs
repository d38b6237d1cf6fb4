//! Timestamps as fractional seconds since the Unix epoch.
//!
//! Telemetry CSVs carry raw seconds; JSON documents (baselines, machine files,
//! alerts) carry ISO-8601 UTC strings. Parsing accepts either form.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Timestamp(pub f64);

#[derive(Debug, thiserror::Error)]
#[error("unparseable timestamp {0:?} (expected ISO-8601 or seconds since epoch)")]
pub struct TimestampParseError(pub String);

impl Timestamp {
    pub fn seconds(self) -> f64 {
        self.0
    }

    pub fn plus_hours(self, hours: f64) -> Self {
        Timestamp(self.0 + hours * SECONDS_PER_HOUR)
    }

    pub fn plus_seconds(self, secs: f64) -> Self {
        Timestamp(self.0 + secs)
    }

    fn to_datetime(self) -> DateTime<Utc> {
        let secs = self.0.floor();
        let nanos = ((self.0 - secs) * 1e9).round().min(999_999_999.0) as u32;
        Utc.timestamp_opt(secs as i64, nanos)
            .single()
            .unwrap_or_else(|| Utc.timestamp_opt(0, 0).unwrap())
    }

    /// RFC 3339 with a `Z` suffix, sub-second digits only when present.
    pub fn to_iso(self) -> String {
        self.to_datetime().to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    /// `2022-01-01 06:00:00`, the form used in alert subjects and tables.
    pub fn to_display(self) -> String {
        self.to_datetime().format("%Y-%m-%d %H:%M:%S").to_string()
    }

    /// ISO-8601 basic format (`20220101T060000Z`), safe inside file names.
    pub fn to_file_stamp(self) -> String {
        self.to_datetime().format("%Y%m%dT%H%M%SZ").to_string()
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(v) = t.parse::<f64>() {
            if v.is_finite() {
                return Ok(Timestamp(v));
            }
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
            return Ok(from_datetime(dt.with_timezone(&Utc)));
        }
        for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(t, fmt) {
                return Ok(from_datetime(naive.and_utc()));
            }
        }
        Err(TimestampParseError(s.to_string()))
    }
}

fn from_datetime(dt: DateTime<Utc>) -> Timestamp {
    Timestamp(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Secs(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Secs(v) => Ok(Timestamp(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Half-open time range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        Window { start, end }
    }

    /// The full hour ending at `clock`.
    pub fn hour_ending(clock: Timestamp) -> Self {
        Window::new(clock.plus_hours(-1.0), clock)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start.0 && t < self.end.0
    }

    pub fn duration_secs(&self) -> f64 {
        self.end.0 - self.start.0
    }
}

impl FromStr for Window {
    type Err = TimestampParseError;

    /// `T1..T2`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| TimestampParseError(s.to_string()))?;
        Ok(Window::new(a.parse()?, b.parse()?))
    }
}

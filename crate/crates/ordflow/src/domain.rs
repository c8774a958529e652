//! Core vocabulary: the ten-state order-event alphabet, feed events,
//! intraday time-zones and market-cap categories.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Number of states in the order-event alphabet.
pub const STATE_COUNT: usize = 10;

/// Milliseconds in a civil day.
pub const MS_PER_DAY: u32 = 86_400_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    /// The feed carried an event-type string outside the ten-state alphabet.
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),
    /// A clock string did not parse as `H:MM:SS.mmm` / `HH:MM:SS.mmm`.
    #[error("invalid time of day {input:?}: {reason}")]
    InvalidTimeOfDay { input: String, reason: &'static str },
}

/// The ten order-book event types, in canonical index order.
///
/// Each event type is an (action, side) pair: add, delete, fill (full
/// execution), execute (partial execution) and cancel (partial deletion),
/// on the bid or ask side. The discriminant is the canonical state index
/// used by every matrix in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum OrderKind {
    #[serde(rename = "AB")]
    AddBid = 0,
    #[serde(rename = "AA")]
    AddAsk = 1,
    #[serde(rename = "DB")]
    DeleteBid = 2,
    #[serde(rename = "DA")]
    DeleteAsk = 3,
    #[serde(rename = "FB")]
    FillBid = 4,
    #[serde(rename = "FA")]
    FillAsk = 5,
    #[serde(rename = "EB")]
    ExecuteBid = 6,
    #[serde(rename = "EA")]
    ExecuteAsk = 7,
    #[serde(rename = "CB")]
    CancelBid = 8,
    #[serde(rename = "CA")]
    CancelAsk = 9,
}

impl OrderKind {
    /// All ten kinds in canonical index order.
    pub const ALL: [OrderKind; STATE_COUNT] = [
        OrderKind::AddBid,
        OrderKind::AddAsk,
        OrderKind::DeleteBid,
        OrderKind::DeleteAsk,
        OrderKind::FillBid,
        OrderKind::FillAsk,
        OrderKind::ExecuteBid,
        OrderKind::ExecuteAsk,
        OrderKind::CancelBid,
        OrderKind::CancelAsk,
    ];

    /// Canonical state index, `0..STATE_COUNT`.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`OrderKind::index`].
    pub fn from_index(index: usize) -> Option<OrderKind> {
        Self::ALL.get(index).copied()
    }

    /// The event-type string used by the tick feed, e.g. `"ADD-BID"`.
    pub fn wire_name(self) -> &'static str {
        match self {
            OrderKind::AddBid => "ADD-BID",
            OrderKind::AddAsk => "ADD-ASK",
            OrderKind::DeleteBid => "DELETE-BID",
            OrderKind::DeleteAsk => "DELETE-ASK",
            OrderKind::FillBid => "FILL-BID",
            OrderKind::FillAsk => "FILL-ASK",
            OrderKind::ExecuteBid => "EXECUTE-BID",
            OrderKind::ExecuteAsk => "EXECUTE-ASK",
            OrderKind::CancelBid => "CANCEL-BID",
            OrderKind::CancelAsk => "CANCEL-ASK",
        }
    }

    /// Two-letter abbreviation used in reports and serialized matrices.
    pub fn abbrev(self) -> &'static str {
        match self {
            OrderKind::AddBid => "AB",
            OrderKind::AddAsk => "AA",
            OrderKind::DeleteBid => "DB",
            OrderKind::DeleteAsk => "DA",
            OrderKind::FillBid => "FB",
            OrderKind::FillAsk => "FA",
            OrderKind::ExecuteBid => "EB",
            OrderKind::ExecuteAsk => "EA",
            OrderKind::CancelBid => "CB",
            OrderKind::CancelAsk => "CA",
        }
    }

    /// Parses a feed event-type string. Exact, case-sensitive match only:
    /// anything else is a malformed row, never coerced.
    pub fn from_wire(name: &str) -> Result<OrderKind, DomainError> {
        match name {
            "ADD-BID" => Ok(OrderKind::AddBid),
            "ADD-ASK" => Ok(OrderKind::AddAsk),
            "DELETE-BID" => Ok(OrderKind::DeleteBid),
            "DELETE-ASK" => Ok(OrderKind::DeleteAsk),
            "FILL-BID" => Ok(OrderKind::FillBid),
            "FILL-ASK" => Ok(OrderKind::FillAsk),
            "EXECUTE-BID" => Ok(OrderKind::ExecuteBid),
            "EXECUTE-ASK" => Ok(OrderKind::ExecuteAsk),
            "CANCEL-BID" => Ok(OrderKind::CancelBid),
            "CANCEL-ASK" => Ok(OrderKind::CancelAsk),
            other => Err(DomainError::UnknownEventType(other.to_string())),
        }
    }

    /// True for `DELETE-BID`/`DELETE-ASK`, whose feed rows carry price 0.
    pub fn is_delete(self) -> bool {
        matches!(self, OrderKind::DeleteBid | OrderKind::DeleteAsk)
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for OrderKind {
    type Err = DomainError;

    /// Parses the two-letter abbreviation (the `Display` form).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.abbrev() == s)
            .ok_or_else(|| DomainError::UnknownEventType(s.to_string()))
    }
}

/// Clock time of day at millisecond resolution.
///
/// Stored as milliseconds since midnight; total order matches clock order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u32);

impl TimeOfDay {
    /// Constructs from milliseconds since midnight (`< MS_PER_DAY`).
    pub fn from_millis(ms: u32) -> Option<TimeOfDay> {
        (ms < MS_PER_DAY).then_some(TimeOfDay(ms))
    }

    /// Constructs from clock components.
    pub fn from_hms_milli(h: u32, m: u32, s: u32, ms: u32) -> Option<TimeOfDay> {
        if h < 24 && m < 60 && s < 60 && ms < 1000 {
            Some(TimeOfDay(((h * 60 + m) * 60 + s) * 1000 + ms))
        } else {
            None
        }
    }

    /// Milliseconds since midnight.
    #[inline]
    pub fn millis(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let s = (self.0 / 1000) % 60;
        let m = (self.0 / 60_000) % 60;
        let h = self.0 / 3_600_000;
        write!(f, "{h:02}:{m:02}:{s:02}.{ms:03}")
    }
}

impl FromStr for TimeOfDay {
    type Err = DomainError;

    /// Parses `H:MM:SS.mmm` or `HH:MM:SS.mmm` (the feed emits both: hours
    /// before 10:00 come through as a single digit). Strict otherwise —
    /// minutes/seconds are exactly two digits, milliseconds exactly three.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason| DomainError::InvalidTimeOfDay {
            input: input.to_string(),
            reason,
        };
        let mut clock = input.splitn(3, ':');
        let (h, m, rest) = match (clock.next(), clock.next(), clock.next()) {
            (Some(h), Some(m), Some(rest)) => (h, m, rest),
            _ => return Err(err("expected two ':' separators")),
        };
        if h.is_empty() || h.len() > 2 {
            return Err(err("hour must be one or two digits"));
        }
        if m.len() != 2 {
            return Err(err("minute must be two digits"));
        }
        let (s, ms) = rest
            .split_once('.')
            .ok_or_else(|| err("missing '.' millisecond separator"))?;
        if s.len() != 2 {
            return Err(err("second must be two digits"));
        }
        if ms.len() != 3 {
            return Err(err("millisecond must be three digits"));
        }
        let digits = |t: &str, reason| -> Result<u32, DomainError> {
            if t.bytes().all(|b| b.is_ascii_digit()) {
                t.parse().map_err(|_| err(reason))
            } else {
                Err(err(reason))
            }
        };
        let h = digits(h, "hour must be numeric")?;
        let m = digits(m, "minute must be numeric")?;
        let s = digits(s, "second must be numeric")?;
        let ms = digits(ms, "millisecond must be numeric")?;
        TimeOfDay::from_hms_milli(h, m, s, ms).ok_or_else(|| err("component out of range"))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One tick-feed row, fully parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub date: NaiveDate,
    pub timestamp: TimeOfDay,
    pub order_id: u64,
    pub kind: OrderKind,
    pub ticker: String,
    /// Limit price in currency units; 0 on delete rows by feed convention.
    pub price: f64,
    pub quantity: u64,
    pub exchange: String,
}

/// One intraday analysis window. Both endpoints are inclusive and
/// millisecond-aligned, so adjacent windows meet without overlap
/// (`…:59.999` then `…:00.000`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeZoneSpec {
    pub label: String,
    pub start: TimeOfDay,
    pub end: TimeOfDay,
}

impl TimeZoneSpec {
    pub fn new(label: impl Into<String>, start: TimeOfDay, end: TimeOfDay) -> TimeZoneSpec {
        TimeZoneSpec {
            label: label.into(),
            start,
            end,
        }
    }

    /// Whether `ts` falls inside the closed interval `[start, end]`.
    #[inline]
    pub fn contains(&self, ts: TimeOfDay) -> bool {
        self.start <= ts && ts <= self.end
    }

    /// Window width in milliseconds, counting both endpoints.
    pub fn capacity_millis(&self) -> u64 {
        u64::from(self.end.millis()) - u64::from(self.start.millis()) + 1
    }
}

/// Maps a timestamp to the zone containing it, or `None` for timestamps
/// outside every window (pre-open, lunch gaps in custom tables, post-close).
pub fn zone_of<'a>(ts: TimeOfDay, zones: &'a [TimeZoneSpec]) -> Option<&'a TimeZoneSpec> {
    zones.iter().find(|z| z.contains(ts))
}

fn tod(h: u32, m: u32, s: u32, ms: u32) -> TimeOfDay {
    TimeOfDay::from_hms_milli(h, m, s, ms).expect("static clock literal")
}

/// The six default intraday zones. T1/T2 and T5 are trading hours 1, 2 and
/// the 14:00 hour; T3/T4 split the low-activity midday into 75-minute
/// halves; T6 runs to the closing bell, and the 16:00:00.000 close itself
/// belongs to T6.
pub fn default_zones() -> Vec<TimeZoneSpec> {
    vec![
        TimeZoneSpec::new("T1", tod(9, 30, 0, 0), tod(10, 29, 59, 999)),
        TimeZoneSpec::new("T2", tod(10, 30, 0, 0), tod(11, 29, 59, 999)),
        TimeZoneSpec::new("T3", tod(11, 30, 0, 0), tod(12, 44, 59, 999)),
        TimeZoneSpec::new("T4", tod(12, 45, 0, 0), tod(13, 59, 59, 999)),
        TimeZoneSpec::new("T5", tod(14, 0, 0, 0), tod(14, 59, 59, 999)),
        TimeZoneSpec::new("T6", tod(15, 0, 0, 0), tod(16, 0, 0, 0)),
    ]
}

/// A market-capitalization bucket and the tickers assigned to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapCategory {
    pub label: String,
    pub tickers: Vec<String>,
}

impl CapCategory {
    pub fn new(label: impl Into<String>, tickers: &[&str]) -> CapCategory {
        CapCategory {
            label: label.into(),
            tickers: tickers.iter().map(|t| t.to_string()).collect(),
        }
    }
}

/// Default high/mid/low market-cap groupings (five tickers each).
pub fn default_categories() -> Vec<CapCategory> {
    vec![
        CapCategory::new("HMC", &["AMZN", "JNJ", "JPM", "MSFT", "XOM"]),
        CapCategory::new("MMC", &["ABBV", "HSBC", "NFLX", "ORCL", "PEP"]),
        CapCategory::new("LMC", &["AVGO", "BKNG", "BMY", "NKE", "UNP"]),
    ]
}

/// Default sample: twelve trading days drawn from November and December 2018.
pub fn default_days() -> Vec<NaiveDate> {
    [
        (2018, 11, 7),
        (2018, 11, 9),
        (2018, 11, 12),
        (2018, 11, 14),
        (2018, 11, 15),
        (2018, 11, 28),
        (2018, 12, 4),
        (2018, 12, 6),
        (2018, 12, 7),
        (2018, 12, 10),
        (2018, 12, 21),
        (2018, 12, 26),
    ]
    .iter()
    .map(|&(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).expect("static date literal"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_names_round_trip() {
        for kind in OrderKind::ALL {
            assert_eq!(OrderKind::from_wire(kind.wire_name()).unwrap(), kind);
            assert_eq!(kind.abbrev().parse::<OrderKind>().unwrap(), kind);
            assert_eq!(OrderKind::from_index(kind.index()).unwrap(), kind);
        }
    }

    #[test]
    fn wire_parse_is_exact_and_case_sensitive() {
        for bad in ["add-bid", "ADD_BID", "ADDBID", " ADD-BID", "ADD-BID ", "", "TRADE"] {
            assert!(OrderKind::from_wire(bad).is_err(), "{bad:?} must not parse");
        }
    }

    #[test]
    fn canonical_index_order() {
        let abbrevs: Vec<&str> = OrderKind::ALL.iter().map(|k| k.abbrev()).collect();
        assert_eq!(
            abbrevs,
            ["AB", "AA", "DB", "DA", "FB", "FA", "EB", "EA", "CB", "CA"]
        );
        for (i, kind) in OrderKind::ALL.iter().enumerate() {
            assert_eq!(kind.index(), i);
        }
    }

    #[test]
    fn time_of_day_parses_both_hour_widths() {
        let one: TimeOfDay = "9:30:00.000".parse().unwrap();
        let two: TimeOfDay = "09:30:00.000".parse().unwrap();
        assert_eq!(one, two);
        assert_eq!(one.millis(), (9 * 3600 + 30 * 60) * 1000);
        assert_eq!(two.to_string(), "09:30:00.000");
        let t: TimeOfDay = "16:00:00.000".parse().unwrap();
        assert_eq!(t.millis(), 16 * 3_600_000);
    }

    #[test]
    fn time_of_day_rejects_malformed_strings() {
        for bad in [
            "",
            "9:30:00",
            "9:30:00.00",
            "9:30:00.0000",
            "9:3:00.000",
            "930:00.000",
            "24:00:00.000",
            "09:60:00.000",
            "09:30:60.000",
            "09:30:00,000",
            "-9:30:00.000",
            "09:30:0a.000",
            "09 30:00.000",
            "123:30:00.000",
        ] {
            assert!(bad.parse::<TimeOfDay>().is_err(), "{bad:?} must not parse");
        }
    }

    #[test]
    fn time_of_day_display_round_trips() {
        for ms in [0u32, 1, 999, 34_200_000, 57_600_000, MS_PER_DAY - 1] {
            let t = TimeOfDay::from_millis(ms).unwrap();
            let back: TimeOfDay = t.to_string().parse().unwrap();
            assert_eq!(back, t);
        }
        assert!(TimeOfDay::from_millis(MS_PER_DAY).is_none());
    }

    #[test]
    fn default_zone_boundaries() {
        let zones = default_zones();
        assert_eq!(zones.len(), 6);
        let at = |s: &str| s.parse::<TimeOfDay>().unwrap();
        let label = |s: &str| zone_of(at(s), &zones).map(|z| z.label.as_str());

        assert_eq!(label("09:29:59.999"), None);
        assert_eq!(label("09:30:00.000"), Some("T1"));
        assert_eq!(label("10:29:59.999"), Some("T1"));
        assert_eq!(label("10:30:00.000"), Some("T2"));
        assert_eq!(label("11:29:59.999"), Some("T2"));
        assert_eq!(label("11:30:00.000"), Some("T3"));
        assert_eq!(label("12:44:59.999"), Some("T3"));
        assert_eq!(label("12:45:00.000"), Some("T4"));
        assert_eq!(label("13:59:59.999"), Some("T4"));
        assert_eq!(label("14:00:00.000"), Some("T5"));
        assert_eq!(label("14:59:59.999"), Some("T5"));
        assert_eq!(label("15:00:00.000"), Some("T6"));
        assert_eq!(label("16:00:00.000"), Some("T6"));
        assert_eq!(label("16:00:00.001"), None);
        assert_eq!(label("04:00:00.002"), None);
        assert_eq!(label("20:00:00.000"), None);
    }

    #[test]
    fn default_zones_partition_the_session() {
        // Every session millisecond belongs to exactly one zone; outside the
        // session, none. Sweep at 100ms granularity plus both exact ends.
        let zones = default_zones();
        let open = 34_200_000u32; // 09:30:00.000
        let close = 57_600_000u32; // 16:00:00.000
        for ms in (0..MS_PER_DAY).step_by(100).chain([open, close, close + 1]) {
            let ts = TimeOfDay::from_millis(ms).unwrap();
            let hits = zones.iter().filter(|z| z.contains(ts)).count();
            if (open..=close).contains(&ms) {
                assert_eq!(hits, 1, "session ms {ms} must be in exactly one zone");
            } else {
                assert_eq!(hits, 0, "off-session ms {ms} must be unzoned");
            }
        }
    }

    #[test]
    fn default_zone_widths() {
        let zones = default_zones();
        let minutes: Vec<u64> = zones.iter().map(|z| z.capacity_millis() / 60_000).collect();
        assert_eq!(minutes, [60, 60, 75, 75, 60, 60]);
        // T6 carries one extra millisecond: the closing tick itself.
        assert_eq!(zones[5].capacity_millis(), 3_600_001);
        for z in &zones[..5] {
            assert_eq!(z.capacity_millis() % 60_000, 0);
        }
    }

    #[test]
    fn default_categories_cover_fifteen_distinct_tickers() {
        let cats = default_categories();
        assert_eq!(cats.len(), 3);
        let mut all: Vec<&str> = cats
            .iter()
            .flat_map(|c| c.tickers.iter().map(|t| t.as_str()))
            .collect();
        assert_eq!(all.len(), 15);
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 15, "tickers must be disjoint across categories");
        assert_eq!(default_days().len(), 12);
    }

    #[test]
    fn order_kind_serde_uses_abbreviations() {
        let json = serde_json::to_string(&OrderKind::CancelAsk).unwrap();
        assert_eq!(json, "\"CA\"");
        let back: OrderKind = serde_json::from_str("\"FB\"").unwrap();
        assert_eq!(back, OrderKind::FillBid);
    }
}

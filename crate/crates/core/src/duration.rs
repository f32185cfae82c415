//! Temporal units and log-second arithmetic.
//!
//! Durations are carried as the natural logarithm of their length in
//! seconds. Unit bucketing, approximate agreement and the coarse
//! less-than-a-day split all operate on that representation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Seconds in one day; the coarse-grained boundary.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// The eight temporal units, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemporalUnit {
    Second,
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Year,
    Decade,
}

impl TemporalUnit {
    pub const ALL: [TemporalUnit; 8] = [
        TemporalUnit::Second,
        TemporalUnit::Minute,
        TemporalUnit::Hour,
        TemporalUnit::Day,
        TemporalUnit::Week,
        TemporalUnit::Month,
        TemporalUnit::Year,
        TemporalUnit::Decade,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<TemporalUnit> {
        Self::ALL.get(ordinal).copied()
    }

    /// Canonical length in seconds (30-day month, 365-day year).
    pub fn seconds(self) -> f64 {
        match self {
            TemporalUnit::Second => 1.0,
            TemporalUnit::Minute => 60.0,
            TemporalUnit::Hour => 3_600.0,
            TemporalUnit::Day => 86_400.0,
            TemporalUnit::Week => 604_800.0,
            TemporalUnit::Month => 2_592_000.0,
            TemporalUnit::Year => 31_536_000.0,
            TemporalUnit::Decade => 315_360_000.0,
        }
    }

    pub fn log_seconds(self) -> LogSeconds {
        LogSeconds(self.seconds().ln())
    }

    pub fn name(self) -> &'static str {
        match self {
            TemporalUnit::Second => "second",
            TemporalUnit::Minute => "minute",
            TemporalUnit::Hour => "hour",
            TemporalUnit::Day => "day",
            TemporalUnit::Week => "week",
            TemporalUnit::Month => "month",
            TemporalUnit::Year => "year",
            TemporalUnit::Decade => "decade",
        }
    }

    /// Parses a unit word, case-insensitively, accepting a plural "s".
    pub fn parse_word(word: &str) -> Option<TemporalUnit> {
        let lower = word.to_ascii_lowercase();
        let stem = lower.strip_suffix('s').unwrap_or(&lower);
        Self::ALL.iter().copied().find(|u| u.name() == stem || u.name() == lower)
    }
}

impl fmt::Display for TemporalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemporalUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemporalUnit::parse_word(s.trim()).ok_or_else(|| Error::Data(format!("unknown temporal unit {s:?}")))
    }
}

impl Serialize for TemporalUnit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TemporalUnit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Natural log of a strictly positive duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogSeconds(pub f64);

impl LogSeconds {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn from_seconds(seconds: f64) -> Result<LogSeconds> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::InvalidQuantity(seconds));
        }
        Ok(LogSeconds(seconds.ln()))
    }

    pub fn seconds(self) -> f64 {
        self.0.exp()
    }
}

impl fmt::Display for LogSeconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// A contiguous prefix of the unit order used as a label set.
///
/// `Seven` stops at year; `Eight` adds decade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UnitInventory {
    Seven,
    #[default]
    Eight,
}

impl UnitInventory {
    pub fn from_size(size: usize) -> Result<UnitInventory> {
        match size {
            7 => Ok(UnitInventory::Seven),
            8 => Ok(UnitInventory::Eight),
            n => Err(Error::Config(format!("unit inventory must have 7 or 8 units, got {n}"))),
        }
    }

    pub fn units(self) -> &'static [TemporalUnit] {
        &TemporalUnit::ALL[..self.len()]
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        match self {
            UnitInventory::Seven => 7,
            UnitInventory::Eight => 8,
        }
    }

    pub fn contains(self, unit: TemporalUnit) -> bool {
        unit.ordinal() < self.len()
    }

    /// Position of `unit` in this inventory, if present.
    pub fn index_of(self, unit: TemporalUnit) -> Option<usize> {
        self.contains(unit).then(|| unit.ordinal())
    }
}

impl Serialize for UnitInventory {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.len() as u64)
    }
}

impl<'de> Deserialize<'de> for UnitInventory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let n = u64::deserialize(deserializer)?;
        UnitInventory::from_size(n as usize).map_err(serde::de::Error::custom)
    }
}

/// Coarse-grained label: shorter or longer than one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoarseLabel {
    #[serde(rename = "<day")]
    LessThanDay,
    #[serde(rename = ">day")]
    MoreThanDay,
}

impl CoarseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarseLabel::LessThanDay => "<day",
            CoarseLabel::MoreThanDay => ">day",
        }
    }
}

impl fmt::Display for CoarseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoarseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "<day" => Ok(CoarseLabel::LessThanDay),
            ">day" => Ok(CoarseLabel::MoreThanDay),
            other => Err(Error::Data(format!("unknown coarse label {other:?}"))),
        }
    }
}

/// `ln(quantity * seconds(unit))`.
pub fn normalize(quantity: f64, unit: TemporalUnit) -> Result<LogSeconds> {
    if !(quantity.is_finite() && quantity > 0.0) {
        return Err(Error::InvalidQuantity(quantity));
    }
    LogSeconds::from_seconds(quantity * unit.seconds())
}

/// Unit of `inventory` nearest to `value` in log space. Exact midpoints go
/// to the smaller unit.
pub fn closest_unit(value: LogSeconds, inventory: UnitInventory) -> TemporalUnit {
    let mut best = inventory.units()[0];
    let mut best_dist = (value.0 - best.log_seconds().0).abs();
    for &unit in &inventory.units()[1..] {
        let dist = (value.0 - unit.log_seconds().0).abs();
        // strict: ties keep the earlier, smaller unit
        if dist < best_dist {
            best = unit;
            best_dist = dist;
        }
    }
    best
}

/// Same unit or adjacent units.
pub fn approx_match(a: TemporalUnit, b: TemporalUnit) -> bool {
    a.ordinal().abs_diff(b.ordinal()) <= 1
}

pub fn coarse_of_value(value: LogSeconds) -> CoarseLabel {
    if value.0 < SECONDS_PER_DAY.ln() {
        CoarseLabel::LessThanDay
    } else {
        CoarseLabel::MoreThanDay
    }
}

pub fn coarse_of_unit(unit: TemporalUnit) -> CoarseLabel {
    match unit {
        TemporalUnit::Second | TemporalUnit::Minute | TemporalUnit::Hour => CoarseLabel::LessThanDay,
        _ => CoarseLabel::MoreThanDay,
    }
}

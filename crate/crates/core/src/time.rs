//! Simulation clock, the engagement step grid and analysis periods.
//!
//! All times are whole minutes on an abstract epoch. Durations are plain
//! `u64` minute counts; conversion to hours or days happens only when a
//! report is rendered.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOUR: u64 = 60;
pub const DAY: u64 = 24 * HOUR;

/// Removals later than this after creation count as delayed.
pub const DELAYED_REMOVAL_MIN: u64 = 30 * HOUR;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const fn from_minutes(minutes: u64) -> Self {
        SimTime(minutes)
    }

    pub const fn minutes(self) -> u64 {
        self.0
    }

    /// Minutes elapsed from `earlier` to `self`; zero if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }

    pub fn plus(self, minutes: u64) -> SimTime {
        SimTime(self.0.saturating_add(minutes))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}min", self.0)
    }
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: SimTime,
    pub end: SimTime,
}

impl TimeWindow {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Self { start, end }
    }

    pub fn days(start_day: u64, end_day: u64) -> Self {
        Self::new(
            SimTime::from_minutes(start_day * DAY),
            SimTime::from_minutes(end_day * DAY),
        )
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> u64 {
        self.end.since(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Offsets (minutes after creation) at which engagement time series are sampled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct StepGrid {
    offsets: Vec<u64>,
}

impl StepGrid {
    pub fn new(offsets: Vec<u64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidGrid("no offsets".into()));
        }
        if offsets[0] < 1 {
            return Err(Error::InvalidGrid(
                "first offset must be at least 1 minute".into(),
            ));
        }
        if let Some(w) = offsets.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "offsets not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn first_offset(&self) -> u64 {
        self.offsets[0]
    }

    /// The long-run horizon.
    pub fn final_offset(&self) -> u64 {
        *self.offsets.last().expect("grid is never empty")
    }

    /// Index of the last offset `<= age`, or `None` when `age` precedes the first offset.
    pub fn floor_index(&self, age: u64) -> Option<usize> {
        self.offsets.partition_point(|&o| o <= age).checked_sub(1)
    }
}

impl TryFrom<Vec<u64>> for StepGrid {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        StepGrid::new(v)
    }
}

impl From<StepGrid> for Vec<u64> {
    fn from(g: StepGrid) -> Self {
        g.offsets
    }
}

impl Default for StepGrid {
    fn default() -> Self {
        default_step_grid()
    }
}

/// Sub-daily steps up to one day, then daily steps to 30 days.
pub fn default_step_grid() -> StepGrid {
    let mut offsets = vec![15, 30, 60, 120, 240, 480, 720, 1440];
    offsets.extend((2..=30).map(|d| d * DAY));
    StepGrid::new(offsets).expect("default grid is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PeriodName {
    Baseline,
    Jan6,
    Jan12,
    RemovedPages,
}

impl PeriodName {
    pub const TIME_SLICES: [PeriodName; 3] =
        [PeriodName::Baseline, PeriodName::Jan6, PeriodName::Jan12];

    pub fn name(self) -> &'static str {
        match self {
            PeriodName::Baseline => "Baseline",
            PeriodName::Jan6 => "Jan6",
            PeriodName::Jan12 => "Jan12",
            PeriodName::RemovedPages => "RemovedPages",
        }
    }
}

impl fmt::Display for PeriodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PeriodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Baseline" => Ok(PeriodName::Baseline),
            "Jan6" => Ok(PeriodName::Jan6),
            "Jan12" => Ok(PeriodName::Jan12),
            "RemovedPages" => Ok(PeriodName::RemovedPages),
            other => Err(Error::config(format!("unknown period {other:?}"))),
        }
    }
}

/// A named time slice, start-inclusive and end-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub name: PeriodName,
    pub start: SimTime,
    pub end: SimTime,
}

impl Period {
    pub fn new(name: PeriodName, start: SimTime, end: SimTime) -> Self {
        Self { name, start, end }
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }
}

/// A validated, sorted set of disjoint time-slice periods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Period>", into = "Vec<Period>")]
pub struct Periods(Vec<Period>);

impl Periods {
    pub fn new(mut periods: Vec<Period>) -> Result<Self> {
        for p in &periods {
            if p.start >= p.end {
                return Err(Error::config(format!("period {} has start >= end", p.name)));
            }
            if p.name == PeriodName::RemovedPages {
                return Err(Error::config(
                    "RemovedPages is a cause bucket, not a time slice",
                ));
            }
        }
        periods.sort_by_key(|p| p.start);
        for w in periods.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::OverlappingPeriods {
                    first: w[0].name.to_string(),
                    second: w[1].name.to_string(),
                });
            }
        }
        Ok(Self(periods))
    }

    /// Three contiguous slices: days 0..21 baseline, 21..29 the crisis
    /// week, and the tail through `until` (normally just past the last
    /// crawl tick). Slices are clipped
    /// to `until`; ones starting at or after it are dropped.
    pub fn standard(window_start: SimTime, until: SimTime) -> Result<Self> {
        let jan6 = window_start.plus(21 * DAY);
        let jan12 = window_start.plus(29 * DAY);
        let slices = [
            (PeriodName::Baseline, window_start, jan6),
            (PeriodName::Jan6, jan6, jan12),
            (PeriodName::Jan12, jan12, until),
        ];
        Periods::new(
            slices
                .into_iter()
                .filter(|&(_, start, _)| start < until)
                .map(|(name, start, end)| Period::new(name, start, end.min(until)))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[Period] {
        &self.0
    }

    pub fn get(&self, name: PeriodName) -> Option<&Period> {
        self.0.iter().find(|p| p.name == name)
    }

    pub fn period_of(&self, t: SimTime) -> Option<PeriodName> {
        let idx = self.0.partition_point(|p| p.start <= t).checked_sub(1)?;
        let p = &self.0[idx];
        p.contains(t).then_some(p.name)
    }
}

impl TryFrom<Vec<Period>> for Periods {
    type Error = Error;

    fn try_from(v: Vec<Period>) -> Result<Self> {
        Periods::new(v)
    }
}

impl From<Periods> for Vec<Period> {
    fn from(p: Periods) -> Self {
        p.0
    }
}

/// Returns the period containing `t`, or `None` when `t` lies outside all of them.
///
/// Fails if the supplied periods overlap.
pub fn period_of(t: SimTime, periods: &[Period]) -> Result<Option<PeriodName>> {
    Ok(Periods::new(periods.to_vec())?.period_of(t))
}

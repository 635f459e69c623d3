//! Observation crawls over a ground-truth world, plus the file adapter that
//! ingests real snapshot exports into the same log type.

mod ingest;
mod log;
mod run;
mod series;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{SimTime, TimeWindow, DAY, HOUR};

pub use ingest::{ingest_snapshots, IngestOptions, IngestOutcome, RejectedRow};
pub use log::{
    read_followup_csv, read_observations_csv, write_followup_csv, write_observations_csv,
    FollowupRecord, Observation, ObservationLog,
};
pub use run::{run_crawls, run_crawls_into, CrawlStats, ObservationSink, SummarySink};
pub use series::{
    extract_time_series, read_timeseries_csv, write_timeseries_csv, SeriesRow, TimeSeriesSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrawlKind {
    Discovery,
    History,
    Followup,
}

impl CrawlKind {
    pub fn name(self) -> &'static str {
        match self {
            CrawlKind::Discovery => "Discovery",
            CrawlKind::History => "History",
            CrawlKind::Followup => "Followup",
        }
    }
}

impl fmt::Display for CrawlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrawlKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Discovery" => Ok(CrawlKind::Discovery),
            "History" => Ok(CrawlKind::History),
            "Followup" => Ok(CrawlKind::Followup),
            other => Err(Error::config(format!("unknown crawl kind {other:?}"))),
        }
    }
}

/// Post visits per history crawl in the presets. Large enough that every
/// known post is revisited for the whole crawl period.
pub const DEFAULT_HISTORY_BUDGET: u64 = 5_000_000;

/// When and how often each crawl runs. Ticks fall at
/// `window.start + start_offset + k * interval` up to `crawl_until`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlSchedule {
    pub discovery_interval: u64,
    pub history_interval: u64,
    pub history_budget: u64,
    pub followup_at: SimTime,
    pub start_offset: u64,
    /// Last instant at which discovery and history crawls run.
    pub crawl_until: SimTime,
}

impl CrawlSchedule {
    /// Daily discovery and history crawls.
    pub fn daily(window: TimeWindow) -> Self {
        Self {
            discovery_interval: DAY,
            history_interval: DAY,
            history_budget: DEFAULT_HISTORY_BUDGET,
            followup_at: window.end.plus(60 * DAY),
            start_offset: 0,
            crawl_until: window.end.plus(3 * DAY),
        }
    }

    pub fn hourly(window: TimeWindow) -> Self {
        Self {
            discovery_interval: HOUR,
            history_interval: HOUR,
            ..Self::daily(window)
        }
    }

    /// Daily discovery, hourly re-checks of known posts.
    pub fn hourly_history(window: TimeWindow) -> Self {
        Self {
            history_interval: HOUR,
            ..Self::daily(window)
        }
    }

    /// Hourly discovery, daily re-checks.
    pub fn hourly_discovery(window: TimeWindow) -> Self {
        Self {
            discovery_interval: HOUR,
            ..Self::daily(window)
        }
    }

    /// Looks up a named preset: `daily`, `hourly`, `hourly-history`, `hourly-discovery`.
    pub fn preset(name: &str, window: TimeWindow) -> Result<Self> {
        match name {
            "daily" => Ok(Self::daily(window)),
            "hourly" => Ok(Self::hourly(window)),
            "hourly-history" => Ok(Self::hourly_history(window)),
            "hourly-discovery" => Ok(Self::hourly_discovery(window)),
            other => Err(Error::config(format!("unknown schedule preset {other:?}"))),
        }
    }

    pub fn validate(&self, window: TimeWindow) -> Result<()> {
        if self.discovery_interval == 0 || self.history_interval == 0 {
            return Err(Error::config("crawl intervals must be at least 1 minute"));
        }
        if self.history_budget == 0 {
            return Err(Error::config("history_budget must be positive"));
        }
        if self.followup_at <= window.end {
            return Err(Error::config(format!(
                "followup_at {} must fall after the generation window end {}",
                self.followup_at, window.end
            )));
        }
        if self.followup_at <= self.crawl_until {
            return Err(Error::config(format!(
                "followup_at {} is not after the last history tick (crawl_until {})",
                self.followup_at, self.crawl_until
            )));
        }
        Ok(())
    }

    /// History tick times.
    pub fn history_ticks(&self, window: TimeWindow) -> impl Iterator<Item = SimTime> + '_ {
        ticks(
            window.start.plus(self.start_offset),
            self.history_interval,
            self.crawl_until,
        )
    }

    pub fn discovery_ticks(&self, window: TimeWindow) -> impl Iterator<Item = SimTime> + '_ {
        ticks(
            window.start.plus(self.start_offset),
            self.discovery_interval,
            self.crawl_until,
        )
    }
}

fn ticks(first: SimTime, step: u64, until: SimTime) -> impl Iterator<Item = SimTime> {
    (0u64..)
        .map(move |k| first.plus(k * step))
        .take_while(move |t| *t <= until)
}

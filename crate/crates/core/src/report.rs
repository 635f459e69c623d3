//! Summary tables and plot-ready figure data. Everything is a data
//! file; nothing is rendered.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crawl::{run_crawls_into, CrawlSchedule, SeriesRow, SummarySink};
use crate::error::{Error, Result};
use crate::inference::RemovedSet;
use crate::metrics::{time_to_fraction, PostOutcome, PreventionSummary, ShareRow};
use crate::model::{PageId, PageProfile, Partisanship};
use crate::sim::World;
use crate::time::{PeriodName, StepGrid, DAY, DELAYED_REMOVAL_MIN, HOUR};
use crate::RunMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes serializable rows as `<stem>.csv` (with a `#` provenance line)
/// and/or `<stem>.json` (`{"meta": ..., "rows": [...]}`).
pub fn write_table<T: Serialize>(
    dir: &Path,
    stem: &str,
    meta: &RunMeta,
    rows: &[T],
    formats: &[OutputFormat],
) -> Result<()> {
    for f in formats {
        match f {
            OutputFormat::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut out = create(&path)?;
                writeln!(out, "# {}", meta.preamble()).map_err(|e| Error::io(&path, e))?;
                let mut w = csv::Writer::from_writer(out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{stem}.json"));
                write_json(&path, &serde_json::json!({ "meta": meta, "rows": rows }))?;
            }
        }
    }
    Ok(())
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub set: String,
    pub posts: usize,
    pub engagement: u64,
    pub delayed_removals: usize,
    pub delayed_engagement: u64,
}

/// Dataset overview: full, removed, per-bucket, impacted-publisher and
/// non-removed sets.
pub fn emit_table1(outcomes: &[PostOutcome], removed: &RemovedSet) -> Vec<Table1Row> {
    let delayed = |o: &PostOutcome| {
        removed
            .get(o.post_id)
            .is_some_and(|r| r.lifetime_lb > DELAYED_REMOVAL_MIN)
    };
    let row = |set: &str, posts: Vec<&PostOutcome>| Table1Row {
        set: set.to_string(),
        posts: posts.len(),
        engagement: posts.iter().map(|o| o.observed_total).sum(),
        delayed_removals: posts.iter().filter(|o| delayed(o)).count(),
        delayed_engagement: posts
            .iter()
            .filter(|o| delayed(o))
            .map(|o| o.observed_total)
            .sum(),
    };
    let bucket_of = |o: &PostOutcome| removed.get(o.post_id).map(|r| r.bucket());
    let impacted: BTreeSet<PageId> = removed
        .records
        .iter()
        .filter(|r| !r.page_deletion)
        .map(|r| r.page_id)
        .collect();

    let mut rows = vec![
        row("Full", outcomes.iter().collect()),
        row("Removed", outcomes.iter().filter(|o| o.removed).collect()),
    ];
    for name in [
        PeriodName::Baseline,
        PeriodName::Jan6,
        PeriodName::Jan12,
        PeriodName::RemovedPages,
    ] {
        rows.push(row(
            name.name(),
            outcomes
                .iter()
                .filter(|o| bucket_of(o) == Some(name))
                .collect(),
        ));
    }
    rows.push(row(
        "ImpactedPublishers",
        outcomes
            .iter()
            .filter(|o| impacted.contains(&o.page_id))
            .collect(),
    ));
    rows.push(row(
        "NonRemoved",
        outcomes.iter().filter(|o| !o.removed).collect(),
    ));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Point {
    pub period: String,
    pub hours: u64,
    pub days: f64,
    pub cumulative_fraction: f64,
}

/// Hourly CDF of lifetime lower bounds per bucket (and overall), from 0 h
/// to the first hour covering every record.
pub fn emit_fig1(removed: &RemovedSet) -> Vec<Fig1Point> {
    let mut groups: Vec<(String, Vec<u64>)> = vec![(
        "All".into(),
        removed.records.iter().map(|r| r.lifetime_lb).collect(),
    )];
    for name in PeriodName::TIME_SLICES
        .into_iter()
        .chain([PeriodName::RemovedPages])
    {
        groups.push((
            name.name().into(),
            removed
                .records
                .iter()
                .filter(|r| r.bucket() == name)
                .map(|r| r.lifetime_lb)
                .collect(),
        ));
    }
    let mut out = Vec::new();
    for (period, mut lbs) in groups {
        if lbs.is_empty() {
            continue;
        }
        lbs.sort_unstable();
        let max_h = lbs.last().unwrap().div_ceil(HOUR);
        for h in 0..=max_h {
            let le = lbs.partition_point(|&l| l <= h * HOUR);
            out.push(Fig1Point {
                period: period.clone(),
                hours: h,
                days: h as f64 / 24.0,
                cumulative_fraction: le as f64 / lbs.len() as f64,
            });
        }
    }
    out
}

/// Share of records with lifetime bound at most `minutes`.
pub fn lifetime_share_within(
    removed: &RemovedSet,
    bucket: Option<PeriodName>,
    minutes: u64,
) -> Option<f64> {
    let lbs: Vec<u64> = removed
        .records
        .iter()
        .filter(|r| bucket.is_none_or(|b| r.bucket() == b))
        .map(|r| r.lifetime_lb)
        .collect();
    (!lbs.is_empty())
        .then(|| lbs.iter().filter(|&&l| l <= minutes).count() as f64 / lbs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub class: String,
    pub offset_min: u64,
    pub days: f64,
    pub count: usize,
    pub fraction: f64,
}

/// Histogram of time to 80 % of lifetime engagement for surviving baseline
/// posts, by viral class, over grid offsets.
pub fn emit_fig2(rows: &[&SeriesRow], grid: &StepGrid, threshold: f64) -> Vec<Fig2Row> {
    let mut out = Vec::new();
    for (class, viral) in [("nonviral", false), ("viral", true)] {
        let mut hist: BTreeMap<u64, usize> = grid.offsets().iter().map(|&o| (o, 0)).collect();
        let mut n = 0usize;
        for r in rows
            .iter()
            .filter(|r| (r.long_run() as f64 >= threshold) == viral)
        {
            if let Some(t) = time_to_fraction(&r.values, grid, 0.8) {
                *hist.get_mut(&t).expect("offsets come from the grid") += 1;
                n += 1;
            }
        }
        for (offset, count) in hist {
            out.push(Fig2Row {
                class: class.into(),
                offset_min: offset,
                days: offset as f64 / DAY as f64,
                count,
                fraction: if n > 0 { count as f64 / n as f64 } else { 0.0 },
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub period: String,
    pub status: String,
    pub engagement: u64,
    pub far_left: f64,
    pub slightly_left: f64,
    pub center: f64,
    pub slightly_right: f64,
    pub far_right: f64,
}

pub fn emit_fig3(shares: &[ShareRow]) -> Vec<Fig3Row> {
    shares
        .iter()
        .map(|s| Fig3Row {
            period: s.period.name().into(),
            status: if s.removed { "removed" } else { "non_removed" }.into(),
            engagement: s.engagement,
            far_left: s.shares[0],
            slightly_left: s.shares[1],
            center: s.shares[2],
            slightly_right: s.shares[3],
            far_right: s.shares[4],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopImpactedRow {
    pub page_id: PageId,
    pub partisanship: Partisanship,
    pub misinformation: bool,
    pub removed_posts: usize,
    pub removed_engagement: u64,
    pub page_engagement: u64,
    pub removed_share: f64,
}

/// Pages with at least one removal, by removed engagement (descending).
pub fn emit_top_impacted(pages: &[PageProfile], outcomes: &[PostOutcome]) -> Vec<TopImpactedRow> {
    let mut acc: BTreeMap<PageId, (usize, u64, u64)> = BTreeMap::new();
    for o in outcomes {
        let e = acc.entry(o.page_id).or_default();
        e.2 += o.observed_total;
        if o.removed {
            e.0 += 1;
            e.1 += o.observed_total;
        }
    }
    let label: BTreeMap<PageId, &PageProfile> = pages.iter().map(|p| (p.page_id, p)).collect();
    let mut rows: Vec<TopImpactedRow> = acc
        .into_iter()
        .filter(|(_, (n, _, _))| *n > 0)
        .filter_map(|(page, (n, removed, total))| {
            let p = label.get(&page)?;
            Some(TopImpactedRow {
                page_id: page,
                partisanship: p.partisanship,
                misinformation: p.misinformation,
                removed_posts: n,
                removed_engagement: removed,
                page_engagement: total,
                removed_share: if total > 0 {
                    removed as f64 / total as f64
                } else {
                    0.0
                },
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        b.removed_engagement
            .cmp(&a.removed_engagement)
            .then(a.page_id.cmp(&b.page_id))
    });
    rows
}

/// The same rows ranked by removed-engagement share.
pub fn rank_by_share(mut rows: Vec<TopImpactedRow>) -> Vec<TopImpactedRow> {
    rows.sort_by(|a, b| {
        b.removed_share
            .total_cmp(&a.removed_share)
            .then(a.page_id.cmp(&b.page_id))
    });
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleComparisonRow {
    pub schedule: String,
    pub discovery_interval_min: u64,
    pub history_interval_min: u64,
    pub history_budget: u64,
    pub removed_observed: usize,
    pub missed_removals: usize,
    /// Mean of true delay − lifetime bound over removals before the last tick.
    pub mean_slack_min: Option<f64>,
    pub crawl_visits: u64,
}

/// Runs each schedule against one world and compares what it sees.
/// Schedules run on separate threads; results keep input order.
pub fn compare_schedules(
    world: &World,
    schedules: &[(String, CrawlSchedule)],
) -> Result<Vec<ScheduleComparisonRow>> {
    if schedules.len() < 2 {
        return Err(Error::config(
            "compare-schedules needs at least two schedules",
        ));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = schedules
            .iter()
            .map(|(name, s)| {
                scope.spawn(move || -> Result<ScheduleComparisonRow> {
                    let mut sink = SummarySink::new(world);
                    let stats = run_crawls_into(world, s, &mut sink)?;
                    let removed_observed = world
                        .posts
                        .iter()
                        .enumerate()
                        .filter(|(i, p)| p.removal.is_some() && sink.last_observed(*i).is_some())
                        .count();
                    Ok(ScheduleComparisonRow {
                        schedule: name.clone(),
                        discovery_interval_min: s.discovery_interval,
                        history_interval_min: s.history_interval,
                        history_budget: s.history_budget,
                        removed_observed,
                        missed_removals: sink.missed_removals(world),
                        mean_slack_min: sink.mean_slack(world, s.crawl_until),
                        crawl_visits: stats.total(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("schedule worker panicked"))
            .collect()
    })
}

/// Headline numbers a platform could publish about its own moderation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparencySummary {
    pub meta: RunMeta,
    pub posts: usize,
    pub removed_posts: usize,
    pub removed_share_of_posts: f64,
    pub removed_share_of_engagement: f64,
    pub median_lifetime_lb_hours: Option<f64>,
    pub share_removed_within_30h: Option<f64>,
    pub delayed_removals: usize,
    pub pages_deleted: usize,
    pub prevention: PreventionSummary,
}

pub fn transparency_summary(
    meta: RunMeta,
    outcomes: &[PostOutcome],
    removed: &RemovedSet,
    prevention: PreventionSummary,
) -> TransparencySummary {
    let mut lbs: Vec<u64> = removed.records.iter().map(|r| r.lifetime_lb).collect();
    lbs.sort_unstable();
    let median = (!lbs.is_empty()).then(|| {
        let n = lbs.len();
        let m = if n % 2 == 1 {
            lbs[n / 2] as f64
        } else {
            (lbs[n / 2 - 1] + lbs[n / 2]) as f64 / 2.0
        };
        m / HOUR as f64
    });
    TransparencySummary {
        meta,
        posts: outcomes.len(),
        removed_posts: removed.len(),
        removed_share_of_posts: if outcomes.is_empty() {
            0.0
        } else {
            removed.len() as f64 / outcomes.len() as f64
        },
        removed_share_of_engagement: crate::metrics::weighted_removal_rate(outcomes),
        median_lifetime_lb_hours: median,
        share_removed_within_30h: lifetime_share_within(removed, None, DELAYED_REMOVAL_MIN),
        delayed_removals: removed.records.iter().filter(|r| r.delayed).count(),
        pages_deleted: removed
            .records
            .iter()
            .filter(|r| r.page_deletion)
            .map(|r| r.page_id)
            .collect::<BTreeSet<_>>()
            .len(),
        prevention,
    }
}

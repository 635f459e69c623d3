//! Virality threshold, engagement-potential estimators, prevented
//! engagement, removal rates, partisan shares and significance tests.

mod estimator;
mod prevention;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crawl::{ObservationLog, SeriesRow, TimeSeriesSet};
use crate::error::{Error, Result};
use crate::inference::{summarize_posts, RemovedSet};
use crate::model::{PageId, PageProfile, Partisanship, PostId};
use crate::time::{PeriodName, Periods, SimTime, StepGrid, DAY};
use crate::RunMeta;

pub use estimator::{
    build_estimators, EngagementEstimator, EstimatorIndex, EstimatorScope, PageEstimators,
};
pub use prevention::{
    prevented_engagement, write_prevention_csv, PreventionResult, PreventionSummary, ViralRule,
};
pub use stats::{median_test, welch_t_test, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViralityThreshold {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub threshold: f64,
}

/// Mean + 3σ over non-removed posts' long-run totals.
pub fn virality_threshold(totals: &[u64]) -> Result<ViralityThreshold> {
    if totals.is_empty() {
        return Err(Error::EmptyInput(
            "virality_threshold needs at least one total",
        ));
    }
    let n = totals.len() as f64;
    let mean = totals.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = totals
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let stddev = var.sqrt();
    Ok(ViralityThreshold {
        mean,
        stddev,
        threshold: mean + 3.0 * stddev,
    })
}

/// Smallest grid offset at which the series reaches `fraction` of its last value.
pub fn time_to_fraction(values: &[u64], grid: &StepGrid, fraction: f64) -> Option<u64> {
    let last = *values.last()?;
    if last == 0 {
        return None;
    }
    let target = fraction * last as f64;
    values
        .iter()
        .zip(grid.offsets())
        .find(|(&v, _)| v as f64 >= target)
        .map(|(_, &o)| o)
}

/// Final observed engagement of one post and whether it was removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostOutcome {
    pub post_id: PostId,
    pub page_id: PageId,
    pub created_at: SimTime,
    pub observed_total: u64,
    pub removed: bool,
}

/// One outcome per observed post. Survivors use their follow-up counts,
/// removed posts their last observation.
pub fn post_outcomes(log: &ObservationLog, removed: &RemovedSet) -> Vec<PostOutcome> {
    summarize_posts(log)
        .into_iter()
        .map(|(id, s)| {
            let is_removed = removed.get(id).is_some();
            let total = match log.followup().get(&id) {
                Some(f) if f.present && !is_removed => f.counts.total(),
                _ => s.last_counts.total(),
            };
            PostOutcome {
                post_id: id,
                page_id: s.page_id,
                created_at: s.created_at,
                observed_total: total,
                removed: is_removed,
            }
        })
        .collect()
}

/// Removed-post engagement over all engagement in a category; 0 when the
/// category has no engagement.
pub fn weighted_removal_rate<'a>(posts: impl IntoIterator<Item = &'a PostOutcome>) -> f64 {
    let (removed, total) = posts.into_iter().fold((0u128, 0u128), |(r, t), p| {
        let v = p.observed_total as u128;
        (r + if p.removed { v } else { 0 }, t + v)
    });
    if total == 0 {
        0.0
    } else {
        removed as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalRateRow {
    pub partisanship: Partisanship,
    pub misinformation: bool,
    pub posts: usize,
    pub removed_posts: usize,
    pub engagement: u64,
    pub removed_engagement: u64,
    pub rate: f64,
}

/// Engagement-weighted removal rates per partisanship × misinformation cell.
pub fn removal_rates_by_category(
    outcomes: &[PostOutcome],
    pages: &[PageProfile],
) -> Vec<RemovalRateRow> {
    let label: BTreeMap<PageId, (Partisanship, bool)> = pages
        .iter()
        .map(|p| (p.page_id, (p.partisanship, p.misinformation)))
        .collect();
    let mut cells: BTreeMap<(Partisanship, bool), Vec<&PostOutcome>> = BTreeMap::new();
    for o in outcomes {
        if let Some(&key) = label.get(&o.page_id) {
            cells.entry(key).or_default().push(o);
        }
    }
    let mut rows = Vec::new();
    for p in Partisanship::ALL {
        for misinformation in [false, true] {
            let Some(posts) = cells.get(&(p, misinformation)) else {
                continue;
            };
            let removed: Vec<&&PostOutcome> = posts.iter().filter(|o| o.removed).collect();
            rows.push(RemovalRateRow {
                partisanship: p,
                misinformation,
                posts: posts.len(),
                removed_posts: removed.len(),
                engagement: posts.iter().map(|o| o.observed_total).sum(),
                removed_engagement: removed.iter().map(|o| o.observed_total).sum(),
                rate: weighted_removal_rate(posts.iter().copied()),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub period: PeriodName,
    pub removed: bool,
    pub engagement: u64,
    /// Indexed like [`Partisanship::ALL`]; sums to 1.
    pub shares: [f64; 5],
}

/// Engagement shares by partisanship, per period and removal status.
///
/// Survivors are sliced by creation time, removed posts by their bucket.
/// Rows without engagement are omitted.
pub fn engagement_share_breakdown(
    outcomes: &[PostOutcome],
    pages: &[PageProfile],
    removed: &RemovedSet,
    periods: &Periods,
) -> Vec<ShareRow> {
    let label: BTreeMap<PageId, Partisanship> =
        pages.iter().map(|p| (p.page_id, p.partisanship)).collect();
    let mut acc: BTreeMap<(PeriodName, bool), [u128; 5]> = BTreeMap::new();
    for o in outcomes {
        let Some(&party) = label.get(&o.page_id) else {
            continue;
        };
        let period = if o.removed {
            removed.get(o.post_id).map(|r| r.bucket())
        } else {
            periods.period_of(o.created_at)
        };
        let Some(period) = period else {
            continue;
        };
        acc.entry((period, o.removed)).or_default()[party.index()] += o.observed_total as u128;
    }
    acc.into_iter()
        .filter_map(|((period, removed), sums)| {
            let total: u128 = sums.iter().sum();
            (total > 0).then(|| ShareRow {
                period,
                removed,
                engagement: total as u64,
                shares: sums.map(|s| s as f64 / total as f64),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: String,
    pub all: PreventionSummary,
    pub nonviral: PreventionSummary,
    pub viral: PreventionSummary,
    pub delayed: PreventionSummary,
    pub median_lifetime_lb_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub test: String,
    pub quantity: String,
    pub a: PeriodName,
    pub b: PeriodName,
    pub n_a: usize,
    pub n_b: usize,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub baseline_series: usize,
    pub global_nonviral_support: usize,
    pub global_viral_support: usize,
    pub pages: usize,
    pub pages_with_own_viral: usize,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: RunMeta,
    pub viral_rule: ViralRule,
    pub threshold: ViralityThreshold,
    pub estimators: EstimatorStats,
    pub removed_posts: usize,
    pub summaries: Vec<BucketSummary>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub viral_rule: ViralRule,
    pub min_viral_support: usize,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            viral_rule: ViralRule::ObservedTotal,
            min_viral_support: 10,
        }
    }
}

/// Everything the metrics stage derives.
#[derive(Debug, Clone)]
pub struct MetricsOutput {
    pub threshold: ViralityThreshold,
    pub index: EstimatorIndex,
    pub results: Vec<PreventionResult>,
    pub report: MetricsReport,
}

/// Series of surviving posts created inside the baseline period.
pub fn baseline_rows<'a>(series: &'a TimeSeriesSet, periods: &Periods) -> Vec<&'a SeriesRow> {
    series
        .rows
        .iter()
        .filter(|r| periods.period_of(r.created_at) == Some(PeriodName::Baseline))
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Threshold, estimators, per-post prevention and per-period summaries.
pub fn compute_metrics(
    series: &TimeSeriesSet,
    removed: &RemovedSet,
    periods: &Periods,
    options: MetricsOptions,
    meta: RunMeta,
) -> Result<MetricsOutput> {
    let totals: Vec<u64> = series.rows.iter().map(SeriesRow::long_run).collect();
    let threshold = virality_threshold(&totals)?;
    let base = baseline_rows(series, periods);
    let index = build_estimators(
        &base,
        &series.grid,
        threshold.threshold,
        options.min_viral_support,
    )?;
    let results: Vec<PreventionResult> = removed
        .records
        .iter()
        .map(|r| prevented_engagement(r, &index, options.viral_rule))
        .collect();

    let mut buckets: Vec<(String, Vec<&PreventionResult>)> =
        vec![("All".into(), results.iter().collect())];
    for name in [
        PeriodName::Baseline,
        PeriodName::Jan6,
        PeriodName::Jan12,
        PeriodName::RemovedPages,
    ] {
        buckets.push((
            name.name().into(),
            results.iter().filter(|r| r.bucket == name).collect(),
        ));
    }
    let summaries = buckets
        .into_iter()
        .map(|(bucket, rs)| BucketSummary {
            bucket,
            all: PreventionSummary::of(rs.iter().copied()),
            nonviral: PreventionSummary::of(rs.iter().copied().filter(|r| !r.viral)),
            viral: PreventionSummary::of(rs.iter().copied().filter(|r| r.viral)),
            delayed: PreventionSummary::of(rs.iter().copied().filter(|r| r.delayed)),
            median_lifetime_lb_min: median(rs.iter().map(|r| r.lifetime_lb as f64).collect()),
        })
        .collect();

    let report = MetricsReport {
        meta,
        viral_rule: options.viral_rule,
        threshold,
        estimators: EstimatorStats {
            baseline_series: base.len(),
            global_nonviral_support: index
                .global_nonviral
                .as_ref()
                .map_or(0, |e| e.support_count),
            global_viral_support: index.global_viral.as_ref().map_or(0, |e| e.support_count),
            pages: index.pages.len(),
            pages_with_own_viral: index.pages.values().filter(|p| p.viral.is_some()).count(),
        },
        removed_posts: removed.len(),
        summaries,
        comparisons: period_comparisons(removed, &results, periods),
    };
    Ok(MetricsOutput {
        threshold,
        index,
        results,
        report,
    })
}

/// Removals per day of each period, keyed on last observation.
pub fn daily_removal_counts(removed: &RemovedSet, periods: &Periods, name: PeriodName) -> Vec<f64> {
    let Some(p) = periods.get(name) else {
        return Vec::new();
    };
    let days = p.end.since(p.start).div_ceil(DAY) as usize;
    let mut counts = vec![0.0; days];
    for r in removed.records.iter().filter(|r| r.bucket() == name) {
        counts[(r.last_observed_at.since(p.start) / DAY) as usize] += 1.0;
    }
    counts
}

/// Baseline against each later period: Welch on daily removal counts and
/// Mood's median test on lifetimes per viral class. Comparisons without
/// enough data are skipped.
pub fn period_comparisons(
    removed: &RemovedSet,
    results: &[PreventionResult],
    periods: &Periods,
) -> Vec<Comparison> {
    let mut out = Vec::new();
    let base_counts = daily_removal_counts(removed, periods, PeriodName::Baseline);
    let lifetimes = |bucket: PeriodName, viral: bool| -> Vec<f64> {
        results
            .iter()
            .filter(|r| r.bucket == bucket && r.viral == viral)
            .map(|r| r.lifetime_lb as f64)
            .collect()
    };
    for other in [PeriodName::Jan6, PeriodName::Jan12] {
        let counts = daily_removal_counts(removed, periods, other);
        if let Ok(result) = welch_t_test(&counts, &base_counts) {
            out.push(Comparison {
                test: "welch_t".into(),
                quantity: "daily_removals".into(),
                a: other,
                b: PeriodName::Baseline,
                n_a: counts.len(),
                n_b: base_counts.len(),
                result,
            });
        }
        for viral in [false, true] {
            let a = lifetimes(other, viral);
            let b = lifetimes(PeriodName::Baseline, viral);
            if let Ok(result) = median_test(&a, &b) {
                out.push(Comparison {
                    test: "mood_median".into(),
                    quantity: if viral {
                        "lifetime_viral"
                    } else {
                        "lifetime_nonviral"
                    }
                    .into(),
                    a: other,
                    b: PeriodName::Baseline,
                    n_a: a.len(),
                    n_b: b.len(),
                    result,
                });
            }
        }
    }
    out
}

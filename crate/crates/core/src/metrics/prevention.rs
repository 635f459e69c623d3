use std::io::Write;

use serde::{Deserialize, Serialize};

use super::estimator::EstimatorIndex;
use crate::error::{Error, Result};
use crate::inference::RemovedPostRecord;
use crate::model::{PageId, PostId};
use crate::time::PeriodName;

/// How removed posts are classified as viral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ViralRule {
    /// Last observed total reaches the threshold.
    #[default]
    ObservedTotal,
    /// Observed total plus the non-viral estimator's tail reaches it.
    PredictedPotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreventionResult {
    pub post_id: PostId,
    pub page_id: PageId,
    pub bucket: PeriodName,
    pub delayed: bool,
    pub viral: bool,
    pub lifetime_lb: u64,
    pub observed: u64,
    pub prevented: f64,
    pub potential: f64,
    pub prevention_rate: f64,
}

/// Estimated engagement a removal prevented: the selected mean curve's
/// growth after the last grid step at or before the post's lifetime bound.
pub fn prevented_engagement(
    record: &RemovedPostRecord,
    index: &EstimatorIndex,
    rule: ViralRule,
) -> PreventionResult {
    let observed = record.final_counts.total();
    let anchor = index.grid.floor_index(record.lifetime_lb);
    let viral = match rule {
        ViralRule::ObservedTotal => observed as f64 >= index.threshold,
        ViralRule::PredictedPotential => {
            let tail = index.select(record.page_id, false).tail_from(anchor);
            observed as f64 + tail >= index.threshold
        }
    };
    let prevented = index.select(record.page_id, viral).tail_from(anchor);
    let potential = observed as f64 + prevented;
    PreventionResult {
        post_id: record.post_id,
        page_id: record.page_id,
        bucket: record.bucket(),
        delayed: record.delayed,
        viral,
        lifetime_lb: record.lifetime_lb,
        observed,
        prevented,
        potential,
        prevention_rate: if potential > 0.0 {
            prevented / potential
        } else {
            0.0
        },
    }
}

/// Sums over a group of prevention results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PreventionSummary {
    pub n: usize,
    pub observed: u64,
    pub prevented: f64,
    pub potential: f64,
    /// Σ prevented / Σ potential.
    pub aggregate_rate: f64,
    /// Mean of per-post rates.
    pub mean_rate: f64,
}

impl PreventionSummary {
    pub fn of<'a>(results: impl IntoIterator<Item = &'a PreventionResult>) -> Self {
        let mut s = Self::default();
        let mut rate_sum = 0.0;
        for r in results {
            s.n += 1;
            s.observed += r.observed;
            s.prevented += r.prevented;
            s.potential += r.potential;
            rate_sum += r.prevention_rate;
        }
        if s.potential > 0.0 {
            s.aggregate_rate = s.prevented / s.potential;
        }
        if s.n > 0 {
            s.mean_rate = rate_sum / s.n as f64;
        }
        s
    }
}

#[derive(Serialize)]
struct Row<'a> {
    post_id: u64,
    page_id: u64,
    bucket: &'a str,
    delayed: u8,
    viral: u8,
    lifetime_lb_min: u64,
    observed: u64,
    prevented: String,
    potential: String,
    prevention_rate: String,
}

/// Writes `prevention_results.csv`. Rationals are printed with 6 decimals.
pub fn write_prevention_csv<W: Write>(
    mut out: W,
    preamble: &str,
    results: &[PreventionResult],
) -> Result<()> {
    writeln!(out, "# {preamble}").map_err(|e| Error::io("prevention_results.csv", e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(Row {
            post_id: r.post_id.0,
            page_id: r.page_id.0,
            bucket: r.bucket.name(),
            delayed: r.delayed as u8,
            viral: r.viral as u8,
            lifetime_lb_min: r.lifetime_lb,
            observed: r.observed,
            prevented: format!("{:.6}", r.prevented),
            potential: format!("{:.6}", r.potential),
            prevention_rate: format!("{:.6}", r.prevention_rate),
        })?;
    }
    w.flush()
        .map_err(|e| Error::io("prevention_results.csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crawl::SeriesRow;
    use crate::metrics::build_estimators;
    use crate::model::EngagementCounts;
    use crate::sim::AccrualCurve;
    use crate::time::{default_step_grid, SimTime, StepGrid};

    fn record(page: u64, lb: u64, observed: u64) -> RemovedPostRecord {
        RemovedPostRecord {
            post_id: PostId(1),
            page_id: PageId(page),
            created_at: SimTime(0),
            last_observed_at: SimTime(lb),
            lifetime_lb: lb,
            final_counts: EngagementCounts::new(observed, 0, 0),
            period: PeriodName::Baseline,
            delayed: false,
            page_deletion: false,
        }
    }

    fn index(values: Vec<u64>, grid: &StepGrid) -> EstimatorIndex {
        let r = SeriesRow {
            post_id: PostId(9),
            page_id: PageId(1),
            created_at: SimTime(0),
            values,
        };
        build_estimators(&[&r], grid, 1e12, 10).unwrap()
    }

    #[test]
    fn nothing_left_after_final_offset() {
        let grid = StepGrid::new(vec![15, 60, 43_200]).unwrap();
        let idx = index(vec![100, 200, 500], &grid);
        let r = prevented_engagement(&record(1, 50_000, 480), &idx, ViralRule::ObservedTotal);
        assert_eq!((r.prevented, r.prevention_rate), (0.0, 0.0));
        assert_eq!(r.potential, 480.0);
    }

    #[test]
    fn removal_before_first_step_prevents_everything() {
        let grid = StepGrid::new(vec![15, 60, 43_200]).unwrap();
        let idx = index(vec![100, 200, 500], &grid);
        let r = prevented_engagement(&record(1, 10, 0), &idx, ViralRule::ObservedTotal);
        assert_eq!(r.prevented, 500.0);
        assert_eq!(r.prevention_rate, 1.0);
    }

    #[test]
    fn shared_curve_page_matches_brute_force() {
        let grid = default_step_grid();
        let curve = AccrualCurve::new(1000, 300.0, 3.0).unwrap();
        let values: Vec<u64> = grid
            .offsets()
            .iter()
            .map(|&o| curve.cumulative_at(o))
            .collect();
        let idx = index(values, &grid);
        // Removed at age 240 (a grid step), curve value there:
        let seen = curve.cumulative_at(240);
        let r = prevented_engagement(&record(1, 240, seen), &idx, ViralRule::ObservedTotal);
        assert_eq!(r.prevented, (1000 - seen) as f64);
        assert_eq!(r.potential, 1000.0);

        // A constructed curve worth 300 of 1000 at the removal age.
        let grid = StepGrid::new(vec![60, 600, 43_200]).unwrap();
        let idx = index(vec![100, 300, 1000], &grid);
        let r = prevented_engagement(&record(1, 700, 300), &idx, ViralRule::ObservedTotal);
        assert_eq!(r.prevented, 700.0);
        assert!((r.prevention_rate - 0.7).abs() < 1e-12);
    }

    #[test]
    fn clamps_when_observed_exceeds_curve() {
        let grid = StepGrid::new(vec![15, 60, 43_200]).unwrap();
        let idx = index(vec![1, 2, 3], &grid);
        let r = prevented_engagement(&record(1, 20, 50), &idx, ViralRule::ObservedTotal);
        assert!(r.prevented >= 0.0 && r.prevention_rate <= 1.0);
    }

    #[test]
    fn summary_rates() {
        let mk = |prevented: f64, potential: f64| PreventionResult {
            post_id: PostId(1),
            page_id: PageId(1),
            bucket: PeriodName::Baseline,
            delayed: false,
            viral: false,
            lifetime_lb: 0,
            observed: (potential - prevented) as u64,
            prevented,
            potential,
            prevention_rate: prevented / potential,
        };
        let s = PreventionSummary::of(&[mk(10.0, 100.0), mk(0.0, 300.0)]);
        assert!((s.aggregate_rate - 0.025).abs() < 1e-12);
        assert!((s.mean_rate - 0.05).abs() < 1e-12);
        assert_eq!(PreventionSummary::of(&[]).aggregate_rate, 0.0);
    }
}

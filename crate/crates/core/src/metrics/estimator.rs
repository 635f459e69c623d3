use std::collections::BTreeMap;

use serde::Serialize;

use crate::crawl::SeriesRow;
use crate::error::{Error, Result};
use crate::model::PageId;
use crate::time::StepGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum EstimatorScope {
    Global,
    Page(PageId),
}

/// Mean cumulative engagement per grid step over a set of surviving posts.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementEstimator {
    pub scope: EstimatorScope,
    pub viral: bool,
    pub support_count: usize,
    pub mean_at_step: Vec<f64>,
    sums: Vec<u128>,
}

impl EngagementEstimator {
    fn from_sums(scope: EstimatorScope, viral: bool, sums: Vec<u128>, n: usize) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let mean_at_step = sums.iter().map(|&s| s as f64 / n as f64).collect();
        Some(Self {
            scope,
            viral,
            support_count: n,
            mean_at_step,
            sums,
        })
    }

    fn build<'a>(
        scope: EstimatorScope,
        viral: bool,
        steps: usize,
        rows: impl Iterator<Item = &'a SeriesRow>,
    ) -> Option<Self> {
        let mut sums = vec![0u128; steps];
        let mut n = 0;
        for r in rows {
            for (s, &v) in sums.iter_mut().zip(&r.values) {
                *s += v as u128;
            }
            n += 1;
        }
        Self::from_sums(scope, viral, sums, n)
    }

    /// The same estimator with one contributing series taken out.
    pub fn without(&self, values: &[u64]) -> Option<Self> {
        let sums = self
            .sums
            .iter()
            .zip(values)
            .map(|(&s, &v)| s - v as u128)
            .collect();
        Self::from_sums(self.scope, self.viral, sums, self.support_count - 1)
    }

    pub fn value_at(&self, anchor: Option<usize>) -> f64 {
        anchor.map_or(0.0, |i| self.mean_at_step[i])
    }

    /// Engagement the mean curve still gains after grid step `anchor`
    /// (`None` means before the first step).
    pub fn tail_from(&self, anchor: Option<usize>) -> f64 {
        let last = *self
            .mean_at_step
            .last()
            .expect("estimators are never empty");
        (last - self.value_at(anchor)).max(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PageEstimators {
    pub nonviral: Option<EngagementEstimator>,
    /// Present only when the page has more than `min_viral_support` viral survivors.
    pub viral: Option<EngagementEstimator>,
    pub viral_survivors: usize,
}

/// Per-page and global estimators built from surviving baseline posts.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorIndex {
    pub grid: StepGrid,
    pub threshold: f64,
    pub min_viral_support: usize,
    pub global_nonviral: Option<EngagementEstimator>,
    pub global_viral: Option<EngagementEstimator>,
    pub pages: BTreeMap<PageId, PageEstimators>,
}

/// Builds per-page and global estimators. A series is viral when its
/// long-run value reaches `threshold`.
pub fn build_estimators(
    rows: &[&SeriesRow],
    grid: &StepGrid,
    threshold: f64,
    min_viral_support: usize,
) -> Result<EstimatorIndex> {
    if rows.is_empty() {
        return Err(Error::NoSurvivors);
    }
    if let Some(bad) = rows.iter().find(|r| r.values.len() != grid.len()) {
        return Err(Error::config(format!(
            "series for post {} has {} values, grid has {}",
            bad.post_id,
            bad.values.len(),
            grid.len()
        )));
    }
    let steps = grid.len();
    let is_viral = |r: &SeriesRow| r.long_run() as f64 >= threshold;

    let mut by_page: BTreeMap<PageId, Vec<&SeriesRow>> = BTreeMap::new();
    for r in rows {
        by_page.entry(r.page_id).or_default().push(r);
    }
    let pages = by_page
        .into_iter()
        .map(|(page, rs)| {
            let scope = EstimatorScope::Page(page);
            let viral_survivors = rs.iter().filter(|r| is_viral(r)).count();
            let nonviral = EngagementEstimator::build(
                scope,
                false,
                steps,
                rs.iter().copied().filter(|r| !is_viral(r)),
            );
            let viral = if viral_survivors > min_viral_support {
                EngagementEstimator::build(
                    scope,
                    true,
                    steps,
                    rs.iter().copied().filter(|r| is_viral(r)),
                )
            } else {
                None
            };
            (
                page,
                PageEstimators {
                    nonviral,
                    viral,
                    viral_survivors,
                },
            )
        })
        .collect();

    Ok(EstimatorIndex {
        grid: grid.clone(),
        threshold,
        min_viral_support,
        global_nonviral: EngagementEstimator::build(
            EstimatorScope::Global,
            false,
            steps,
            rows.iter().copied().filter(|r| !is_viral(r)),
        ),
        global_viral: EngagementEstimator::build(
            EstimatorScope::Global,
            true,
            steps,
            rows.iter().copied().filter(|r| is_viral(r)),
        ),
        pages,
    })
}

impl EstimatorIndex {
    fn global(&self, viral: bool) -> &EngagementEstimator {
        let (first, second) = if viral {
            (&self.global_viral, &self.global_nonviral)
        } else {
            (&self.global_nonviral, &self.global_viral)
        };
        first
            .as_ref()
            .or(second.as_ref())
            .expect("at least one global estimator exists")
    }

    /// Estimator for a post on `page`: the page's own curve for its class
    /// when available, otherwise the global curve of that class.
    pub fn select(&self, page: PageId, viral: bool) -> &EngagementEstimator {
        let own = self.pages.get(&page).and_then(|p| {
            if viral {
                p.viral.as_ref()
            } else {
                p.nonviral.as_ref()
            }
        });
        own.unwrap_or_else(|| self.global(viral))
    }

    /// Like [`select`](Self::select) for a post whose own series fed the
    /// page estimator: that series is left out, and the page estimator is
    /// used only if what remains still meets the support rule. Global
    /// estimators are not re-fit.
    pub fn select_excluding(&self, row: &SeriesRow) -> EngagementEstimator {
        let viral = row.long_run() as f64 >= self.threshold;
        if let Some(page) = self.pages.get(&row.page_id) {
            let own = if viral { &page.viral } else { &page.nonviral };
            if let Some(est) = own {
                let remaining = est.support_count - 1;
                let enough = if viral {
                    remaining > self.min_viral_support
                } else {
                    remaining >= 1
                };
                if enough {
                    return est.without(&row.values).expect("support stays positive");
                }
            }
        }
        self.global(viral).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PostId;
    use crate::time::SimTime;

    fn row(id: u64, page: u64, values: Vec<u64>) -> SeriesRow {
        SeriesRow {
            post_id: PostId(id),
            page_id: PageId(page),
            created_at: SimTime(0),
            values,
        }
    }

    fn grid3() -> StepGrid {
        StepGrid::new(vec![15, 60, 43_200]).unwrap()
    }

    #[test]
    fn mean_per_step() {
        let rows = [row(1, 1, vec![10, 20, 30]), row(2, 1, vec![30, 40, 50])];
        let refs: Vec<&SeriesRow> = rows.iter().collect();
        let idx = build_estimators(&refs, &grid3(), 1e9, 10).unwrap();
        let est = idx.select(PageId(1), false);
        assert_eq!(est.mean_at_step, vec![20.0, 30.0, 40.0]);
        assert_eq!(est.support_count, 2);
        assert_eq!(est.scope, EstimatorScope::Page(PageId(1)));
    }

    #[test]
    fn viral_support_rule() {
        let mut rows: Vec<SeriesRow> = (0..11).map(|i| row(i, 1, vec![1, 2, 1000])).collect();
        rows.extend((0..3).map(|i| row(100 + i, 2, vec![1, 2, 1000])));
        rows.push(row(200, 2, vec![1, 2, 3]));
        let refs: Vec<&SeriesRow> = rows.iter().collect();
        let idx = build_estimators(&refs, &grid3(), 500.0, 10).unwrap();
        let own = idx.select(PageId(1), true);
        assert_eq!(own.scope, EstimatorScope::Page(PageId(1)));
        assert_eq!(own.support_count, 11);
        let fallback = idx.select(PageId(2), true);
        assert_eq!(fallback.scope, EstimatorScope::Global);
        assert_eq!(fallback.support_count, 14);
        // Page 1 has no non-viral survivors.
        assert_eq!(idx.select(PageId(1), false).scope, EstimatorScope::Global);
    }

    #[test]
    fn leave_one_out() {
        let rows = [
            row(1, 1, vec![10, 20, 30]),
            row(2, 1, vec![30, 40, 50]),
            row(3, 2, vec![1, 1, 1]),
        ];
        let refs: Vec<&SeriesRow> = rows.iter().collect();
        let idx = build_estimators(&refs, &grid3(), 1e9, 10).unwrap();
        let est = idx.select_excluding(&rows[0]);
        assert_eq!(est.mean_at_step, vec![30.0, 40.0, 50.0]);
        let alone = idx.select_excluding(&rows[2]);
        assert_eq!(alone.scope, EstimatorScope::Global);
        assert_eq!(alone.support_count, 3);
    }

    #[test]
    fn errors_and_tails() {
        let grid = grid3();
        assert!(matches!(
            build_estimators(&[], &grid, 1.0, 10),
            Err(Error::NoSurvivors)
        ));
        let r = row(1, 1, vec![100, 300, 1000]);
        let idx = build_estimators(&[&r], &grid, 1e9, 10).unwrap();
        let e = idx.select(PageId(1), false);
        assert_eq!(e.tail_from(None), 1000.0);
        assert_eq!(e.tail_from(Some(1)), 700.0);
        assert_eq!(e.tail_from(Some(2)), 0.0);
        // No viral survivors anywhere: viral lookups use the non-viral curve.
        assert!(!idx.select(PageId(9), true).viral);
    }
}

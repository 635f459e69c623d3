//! Reconstructs removals from an observation log alone: which posts
//! disappeared, when they were last seen, and which pages vanished whole.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::crawl::{CrawlKind, ObservationLog};
use crate::error::{Error, Result};
use crate::model::{EngagementCounts, PageId, PostId};
use crate::time::{PeriodName, Periods, SimTime, DELAYED_REMOVAL_MIN};

/// Which timestamp decides a removed post's period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PeriodKey {
    #[default]
    LastObserved,
    Created,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedPostRecord {
    pub post_id: PostId,
    pub page_id: PageId,
    pub created_at: SimTime,
    pub last_observed_at: SimTime,
    /// Minutes from creation to the last observation.
    pub lifetime_lb: u64,
    pub final_counts: EngagementCounts,
    pub period: PeriodName,
    pub delayed: bool,
    pub page_deletion: bool,
}

impl RemovedPostRecord {
    /// Period bucket: page deletions take precedence over time slices.
    pub fn bucket(&self) -> PeriodName {
        if self.page_deletion {
            PeriodName::RemovedPages
        } else {
            self.period
        }
    }
}

/// What the log says about one post.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostSummary {
    pub page_id: PageId,
    pub created_at: SimTime,
    pub first_observed_at: SimTime,
    pub last_observed_at: SimTime,
    pub last_counts: EngagementCounts,
    pub history_snapshots: u32,
}

/// Folds a log into one summary per observed post.
pub fn summarize_posts(log: &ObservationLog) -> BTreeMap<PostId, PostSummary> {
    let mut out: BTreeMap<PostId, PostSummary> = BTreeMap::new();
    for o in log.observations() {
        let hist = (o.crawl_kind == CrawlKind::History) as u32;
        out.entry(o.post_id)
            .and_modify(|s| {
                // Observations arrive in time order.
                s.last_observed_at = o.observed_at;
                s.last_counts = o.counts;
                s.history_snapshots += hist;
            })
            .or_insert(PostSummary {
                page_id: o.page_id,
                created_at: o.created_at,
                first_observed_at: o.observed_at,
                last_observed_at: o.observed_at,
                last_counts: o.counts,
                history_snapshots: hist,
            });
    }
    out
}

/// Inferred removals, sorted by post id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemovedSet {
    pub records: Vec<RemovedPostRecord>,
    /// Posts per page in the whole dataset, removed or not.
    pub page_post_counts: BTreeMap<PageId, usize>,
    /// Posts present at follow-up but never refreshed by a history crawl,
    /// or observed but missing from the follow-up.
    pub coverage_gaps: Vec<PostId>,
}

impl RemovedSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: PostId) -> Option<&RemovedPostRecord> {
        self.records
            .binary_search_by_key(&id, |r| r.post_id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Records by bucket. Every record lands in exactly one list.
    pub fn partition(&self) -> BTreeMap<PeriodName, Vec<&RemovedPostRecord>> {
        let mut out: BTreeMap<PeriodName, Vec<&RemovedPostRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.bucket()).or_default().push(r);
        }
        out
    }

    pub fn bucket(&self, name: PeriodName) -> Vec<&RemovedPostRecord> {
        self.records.iter().filter(|r| r.bucket() == name).collect()
    }
}

/// A post is removed iff it was observed and the follow-up found it absent.
pub fn detect_removed(
    log: &ObservationLog,
    periods: &Periods,
    key: PeriodKey,
) -> Result<RemovedSet> {
    let summaries = summarize_posts(log);
    let mut set = RemovedSet::default();
    for s in summaries.values() {
        *set.page_post_counts.entry(s.page_id).or_default() += 1;
    }
    for (&id, s) in &summaries {
        match log.followup().get(&id) {
            Some(f) if !f.present => {
                let at = match key {
                    PeriodKey::LastObserved => s.last_observed_at,
                    PeriodKey::Created => s.created_at,
                };
                let period = periods
                    .period_of(at)
                    .ok_or(Error::UnassignedPeriod { post: id, at: at.0 })?;
                let lifetime_lb = s.last_observed_at.since(s.created_at);
                set.records.push(RemovedPostRecord {
                    post_id: id,
                    page_id: s.page_id,
                    created_at: s.created_at,
                    last_observed_at: s.last_observed_at,
                    lifetime_lb,
                    final_counts: s.last_counts,
                    period,
                    delayed: lifetime_lb > DELAYED_REMOVAL_MIN,
                    page_deletion: false,
                });
            }
            Some(_) if s.history_snapshots == 0 => set.coverage_gaps.push(id),
            Some(_) => {}
            None => set.coverage_gaps.push(id),
        }
    }
    if !set.coverage_gaps.is_empty() {
        log::warn!(
            "{} posts have coverage gaps (no history snapshot or no follow-up), first: {}",
            set.coverage_gaps.len(),
            set.coverage_gaps[0]
        );
    }
    Ok(set)
}

/// Flags pages whose every post was removed at (nearly) the same time.
///
/// A page qualifies with at least `min_posts` removed posts, no surviving
/// post in the dataset, and last observations spanning at most `max_spread`
/// minutes. Flagged records move to the `RemovedPages` bucket.
pub fn detect_page_deletions(
    set: &mut RemovedSet,
    min_posts: usize,
    max_spread: u64,
) -> BTreeSet<PageId> {
    let mut by_page: BTreeMap<PageId, (usize, SimTime, SimTime)> = BTreeMap::new();
    for r in &set.records {
        let e = by_page
            .entry(r.page_id)
            .or_insert((0, r.last_observed_at, r.last_observed_at));
        e.0 += 1;
        e.1 = e.1.min(r.last_observed_at);
        e.2 = e.2.max(r.last_observed_at);
    }
    let flagged: BTreeSet<PageId> = by_page
        .into_iter()
        .filter(|(page, (n, lo, hi))| {
            *n >= min_posts
                && set.page_post_counts.get(page).copied().unwrap_or(0) == *n
                && hi.since(*lo) <= max_spread
        })
        .map(|(page, _)| page)
        .collect();
    for r in &mut set.records {
        r.page_deletion = flagged.contains(&r.page_id);
    }
    flagged
}

/// Whether `page` already had a removed post last seen before `as_of`.
pub fn repeat_offender(page: PageId, set: &RemovedSet, as_of: SimTime) -> bool {
    set.records
        .iter()
        .any(|r| r.page_id == page && r.last_observed_at < as_of)
}

#[derive(Serialize, Deserialize)]
struct Row {
    post_id: u64,
    page_id: u64,
    created_at_min: u64,
    last_observed_at_min: u64,
    lifetime_lb_min: u64,
    reactions: u64,
    shares: u64,
    comments: u64,
    period: String,
    delayed: u8,
    page_deletion: u8,
}

/// Writes `removed_set.csv`, one row per record.
pub fn write_removed_csv<W: Write>(mut out: W, preamble: &str, set: &RemovedSet) -> Result<()> {
    writeln!(out, "# {preamble}").map_err(|e| Error::io("removed_set.csv", e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in &set.records {
        w.serialize(Row {
            post_id: r.post_id.0,
            page_id: r.page_id.0,
            created_at_min: r.created_at.0,
            last_observed_at_min: r.last_observed_at.0,
            lifetime_lb_min: r.lifetime_lb,
            reactions: r.final_counts.reactions,
            shares: r.final_counts.shares,
            comments: r.final_counts.comments,
            period: r.period.name().to_string(),
            delayed: r.delayed as u8,
            page_deletion: r.page_deletion as u8,
        })?;
    }
    w.flush().map_err(|e| Error::io("removed_set.csv", e))
}

/// Reads `removed_set.csv` back. Page post counts are left empty.
pub fn read_removed_csv<R: Read>(input: R) -> Result<Vec<RemovedPostRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let r = row?;
        out.push(RemovedPostRecord {
            post_id: PostId(r.post_id),
            page_id: PageId(r.page_id),
            created_at: SimTime(r.created_at_min),
            last_observed_at: SimTime(r.last_observed_at_min),
            lifetime_lb: r.lifetime_lb_min,
            final_counts: EngagementCounts::new(r.reactions, r.shares, r.comments),
            period: r.period.parse()?,
            delayed: r.delayed == 1,
            page_deletion: r.page_deletion == 1,
        });
    }
    out.sort_by_key(|r| r.post_id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crawl::{FollowupRecord, Observation};
    use crate::time::{Period, DAY, HOUR};

    fn periods() -> Periods {
        Periods::standard(SimTime(0), SimTime(40 * DAY)).unwrap()
    }

    fn obs(
        post: u64,
        page: u64,
        created: u64,
        at: u64,
        total: u64,
        kind: CrawlKind,
    ) -> Observation {
        Observation {
            post_id: PostId(post),
            page_id: PageId(page),
            created_at: SimTime(created),
            crawl_kind: kind,
            observed_at: SimTime(at),
            counts: EngagementCounts::new(total, 0, 0),
        }
    }

    fn followup(entries: &[(u64, bool)]) -> BTreeMap<PostId, FollowupRecord> {
        entries
            .iter()
            .map(|&(id, present)| {
                (
                    PostId(id),
                    FollowupRecord {
                        present,
                        counts: EngagementCounts::ZERO,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn survivor_is_not_removed_and_lifetime_is_last_sighting() {
        let c = DAY - 2 * HOUR;
        let log = ObservationLog::new(
            vec![
                obs(1, 1, c, c + 2 * HOUR, 5, CrawlKind::Discovery),
                obs(1, 1, c, c + 26 * HOUR, 9, CrawlKind::History),
                obs(2, 1, c, c + 2 * HOUR, 5, CrawlKind::Discovery),
                obs(2, 1, c, c + 26 * HOUR, 9, CrawlKind::History),
            ],
            followup(&[(1, false), (2, true)]),
        );
        let set = detect_removed(&log, &periods(), PeriodKey::LastObserved).unwrap();
        assert_eq!(set.len(), 1);
        let r = &set.records[0];
        assert_eq!(r.post_id, PostId(1));
        assert_eq!(r.lifetime_lb, 26 * HOUR);
        assert!(!r.delayed);
        assert_eq!(r.final_counts.total(), 9);
        assert_eq!(r.period, PeriodName::Baseline);
        assert!(set.coverage_gaps.is_empty());
    }

    #[test]
    fn delayed_threshold_is_strict() {
        let log = ObservationLog::new(
            vec![
                obs(1, 1, 0, 30 * HOUR, 1, CrawlKind::History),
                obs(2, 1, 0, 30 * HOUR + 1, 1, CrawlKind::History),
            ],
            followup(&[(1, false), (2, false)]),
        );
        let set = detect_removed(&log, &periods(), PeriodKey::LastObserved).unwrap();
        assert!(!set.records[0].delayed);
        assert!(set.records[1].delayed);
    }

    #[test]
    fn coverage_gap_is_a_warning_not_a_removal() {
        let log = ObservationLog::new(
            vec![obs(1, 1, 0, 10, 1, CrawlKind::Discovery)],
            followup(&[(1, true)]),
        );
        let set = detect_removed(&log, &periods(), PeriodKey::LastObserved).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.coverage_gaps, vec![PostId(1)]);
    }

    #[test]
    fn unassigned_period_is_an_error() {
        let p = Periods::new(vec![Period::new(
            PeriodName::Baseline,
            SimTime(0),
            SimTime(100),
        )])
        .unwrap();
        let log = ObservationLog::new(
            vec![obs(1, 1, 0, 500, 1, CrawlKind::History)],
            followup(&[(1, false)]),
        );
        assert!(matches!(
            detect_removed(&log, &p, PeriodKey::LastObserved),
            Err(Error::UnassignedPeriod { .. })
        ));
    }

    fn page_log(removed: u64, total: u64, spread: u64) -> ObservationLog {
        let mut o = Vec::new();
        let mut f = Vec::new();
        for i in 0..total {
            let at = 5 * DAY + if i == 0 { spread } else { 0 };
            o.push(obs(i + 1, 3, DAY + i, at, 10, CrawlKind::History));
            f.push((i + 1, i >= removed));
        }
        ObservationLog::new(o, followup(&f))
    }

    #[test]
    fn page_deletion_requires_all_posts_and_tight_timing() {
        let mut set =
            detect_removed(&page_log(50, 50, 0), &periods(), PeriodKey::LastObserved).unwrap();
        let flagged = detect_page_deletions(&mut set, 5, DAY);
        assert_eq!(flagged.into_iter().collect::<Vec<_>>(), vec![PageId(3)]);
        assert!(set
            .records
            .iter()
            .all(|r| r.bucket() == PeriodName::RemovedPages));
        let part = set.partition();
        assert_eq!(part[&PeriodName::RemovedPages].len(), 50);

        let mut set =
            detect_removed(&page_log(50, 60, 0), &periods(), PeriodKey::LastObserved).unwrap();
        assert!(detect_page_deletions(&mut set, 5, DAY).is_empty());
        let mut set =
            detect_removed(&page_log(4, 4, 0), &periods(), PeriodKey::LastObserved).unwrap();
        assert!(detect_page_deletions(&mut set, 5, DAY).is_empty());
        let mut set = detect_removed(
            &page_log(8, 8, 2 * DAY),
            &periods(),
            PeriodKey::LastObserved,
        )
        .unwrap();
        assert!(detect_page_deletions(&mut set, 5, DAY).is_empty());
    }

    #[test]
    fn repeat_offender_looks_strictly_back() {
        let log = ObservationLog::new(
            vec![
                obs(1, 1, 0, DAY, 1, CrawlKind::History),
                obs(2, 1, 0, 3 * DAY, 1, CrawlKind::History),
            ],
            followup(&[(1, false), (2, false)]),
        );
        let set = detect_removed(&log, &periods(), PeriodKey::LastObserved).unwrap();
        assert!(!repeat_offender(PageId(1), &set, SimTime(DAY)));
        assert!(repeat_offender(PageId(1), &set, SimTime(3 * DAY)));
        assert!(!repeat_offender(PageId(2), &set, SimTime(9 * DAY)));
    }

    #[test]
    fn csv_round_trip() {
        let log = ObservationLog::new(
            vec![obs(4, 2, 60, 3000, 17, CrawlKind::History)],
            followup(&[(4, false)]),
        );
        let set = detect_removed(&log, &periods(), PeriodKey::Created).unwrap();
        let mut buf = Vec::new();
        write_removed_csv(&mut buf, "t", &set).unwrap();
        assert_eq!(read_removed_csv(buf.as_slice()).unwrap(), set.records);
    }
}

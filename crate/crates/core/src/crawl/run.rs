use std::collections::BTreeMap;

use super::log::{FollowupRecord, Observation, ObservationLog};
use super::{CrawlKind, CrawlSchedule};
use crate::error::Result;
use crate::model::EngagementCounts;
use crate::sim::{split_counts, PostRecord, World};
use crate::time::SimTime;

/// Receives crawl events. `index` is the post's position in `World::posts`.
pub trait ObservationSink {
    fn observe(&mut self, index: usize, post: &PostRecord, kind: CrawlKind, at: SimTime);
    fn followup(&mut self, index: usize, post: &PostRecord, present: bool, at: SimTime);
}

/// Number of snapshots taken by each crawl.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrawlStats {
    pub discovery_visits: u64,
    pub history_visits: u64,
    pub followup_visits: u64,
}

impl CrawlStats {
    pub fn total(&self) -> u64 {
        self.discovery_visits + self.history_visits + self.followup_visits
    }
}

fn counts_at(post: &PostRecord, at: SimTime) -> EngagementCounts {
    split_counts(
        post.curve.cumulative_at(at.since(post.created_at)),
        post.split_seed,
    )
}

/// Runs discovery, history and follow-up crawls, materializing every snapshot.
pub fn run_crawls(world: &World, schedule: &CrawlSchedule) -> Result<ObservationLog> {
    let mut sink = LogSink::default();
    run_crawls_into(world, schedule, &mut sink)?;
    Ok(ObservationLog::new(sink.observations, sink.followup))
}

/// Drives the crawls against `world`, reporting each snapshot to `sink`.
///
/// At a tick shared by both crawls discovery runs first; history then
/// skips the posts discovered at that tick. History visits known posts
/// newest-first and stops once `history_budget` snapshots were taken.
pub fn run_crawls_into<S: ObservationSink>(
    world: &World,
    schedule: &CrawlSchedule,
    sink: &mut S,
) -> Result<CrawlStats> {
    schedule.validate(world.window)?;
    let posts = &world.posts;
    let disc: Vec<SimTime> = schedule.discovery_ticks(world.window).collect();
    let hist: Vec<SimTime> = schedule.history_ticks(world.window).collect();

    let mut stats = CrawlStats::default();
    let mut discovered: Vec<usize> = Vec::new();
    // Discovered posts not yet seen missing, oldest first.
    let mut live: Vec<usize> = Vec::new();
    let mut next_new = 0usize;
    let (mut di, mut hi) = (0usize, 0usize);

    loop {
        let t = match (disc.get(di), hist.get(hi)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        let fresh_from = live.len();
        if disc.get(di) == Some(&t) {
            di += 1;
            while next_new < posts.len() && posts[next_new].created_at <= t {
                let p = &posts[next_new];
                if p.exists_at(t) {
                    sink.observe(next_new, p, CrawlKind::Discovery, t);
                    stats.discovery_visits += 1;
                    discovered.push(next_new);
                    live.push(next_new);
                }
                next_new += 1;
            }
        }
        if hist.get(hi) == Some(&t) {
            hi += 1;
            let mut budget = schedule.history_budget;
            let mut any_gone = false;
            for &i in live[..fresh_from].iter().rev() {
                if budget == 0 {
                    break;
                }
                let p = &posts[i];
                if p.exists_at(t) {
                    sink.observe(i, p, CrawlKind::History, t);
                    stats.history_visits += 1;
                    budget -= 1;
                } else {
                    any_gone = true;
                }
            }
            if any_gone {
                live.retain(|&i| posts[i].exists_at(t));
            }
        }
    }

    let at = schedule.followup_at;
    for &i in &discovered {
        let p = &posts[i];
        sink.followup(i, p, p.exists_at(at), at);
        stats.followup_visits += 1;
    }
    Ok(stats)
}

#[derive(Default)]
struct LogSink {
    observations: Vec<Observation>,
    followup: BTreeMap<crate::model::PostId, FollowupRecord>,
}

impl ObservationSink for LogSink {
    fn observe(&mut self, _index: usize, post: &PostRecord, kind: CrawlKind, at: SimTime) {
        self.observations.push(Observation {
            post_id: post.post_id,
            page_id: post.page_id,
            created_at: post.created_at,
            crawl_kind: kind,
            observed_at: at,
            counts: counts_at(post, at),
        });
    }

    fn followup(&mut self, _index: usize, post: &PostRecord, present: bool, at: SimTime) {
        let counts = if present {
            counts_at(post, at)
        } else {
            EngagementCounts::ZERO
        };
        self.followup
            .insert(post.post_id, FollowupRecord { present, counts });
    }
}

/// Keeps only the last observation time per post; used to compare
/// schedules without materializing snapshots.
#[derive(Debug, Clone)]
pub struct SummarySink {
    last_seen: Vec<Option<SimTime>>,
}

impl SummarySink {
    pub fn new(world: &World) -> Self {
        Self {
            last_seen: vec![None; world.posts.len()],
        }
    }

    pub fn last_observed(&self, index: usize) -> Option<SimTime> {
        self.last_seen[index]
    }

    /// Removed posts that never appeared in any crawl.
    pub fn missed_removals(&self, world: &World) -> usize {
        world
            .posts
            .iter()
            .zip(&self.last_seen)
            .filter(|(p, seen)| p.removal.is_some() && seen.is_none())
            .count()
    }

    /// Mean of (true removal delay − lifetime lower bound) in minutes over
    /// observed posts removed no later than `until`.
    pub fn mean_slack(&self, world: &World, until: SimTime) -> Option<f64> {
        let (sum, n) = world
            .posts
            .iter()
            .zip(&self.last_seen)
            .filter_map(|(p, seen)| {
                let r = p.removal?;
                let seen = (*seen)?;
                (r.at <= until).then(|| r.at.since(seen))
            })
            .fold((0u64, 0u64), |(s, n), x| (s + x, n + 1));
        (n > 0).then(|| sum as f64 / n as f64)
    }
}

impl ObservationSink for SummarySink {
    fn observe(&mut self, index: usize, _post: &PostRecord, _kind: CrawlKind, at: SimTime) {
        self.last_seen[index] = Some(at);
    }

    fn followup(&mut self, _index: usize, _post: &PostRecord, _present: bool, _at: SimTime) {}
}

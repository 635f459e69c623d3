use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::curve::AccrualCurve;
use super::scenario::{ScenarioConfig, ScenarioMode};
use crate::error::{Error, Result};
use crate::model::{PageId, PageProfile, Partisanship, PostId};
use crate::time::{SimTime, TimeWindow, DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemovalCause {
    Moderation,
    Voluntary,
    PageDeletion,
    RetroactivePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalEvent {
    pub at: SimTime,
    pub cause: RemovalCause,
}

/// Ground truth for one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: PostId,
    pub page_id: PageId,
    pub created_at: SimTime,
    pub curve: AccrualCurve,
    pub split_seed: u64,
    pub removal: Option<RemovalEvent>,
}

impl PostRecord {
    /// Whether the post is publicly visible at `t`.
    pub fn exists_at(&self, t: SimTime) -> bool {
        t >= self.created_at && self.removal.is_none_or(|r| t < r.at)
    }

    /// Minutes from creation to removal.
    pub fn removal_delay(&self) -> Option<u64> {
        self.removal.map(|r| r.at.since(self.created_at))
    }
}

/// A generated population of pages and posts. Posts are sorted by
/// `(created_at, post_id)` and post ids increase with that order.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub window: TimeWindow,
    pub pages: Vec<PageProfile>,
    pub posts: Vec<PostRecord>,
}

impl World {
    pub fn post(&self, id: PostId) -> Option<&PostRecord> {
        self.posts
            .binary_search_by_key(&id, |p| p.post_id)
            .ok()
            .map(|i| &self.posts[i])
    }

    pub fn page(&self, id: PageId) -> Option<&PageProfile> {
        self.pages
            .binary_search_by_key(&id, |p| p.page_id)
            .ok()
            .map(|i| &self.pages[i])
    }

    /// Share of all lifetime engagement that has accrued by `age`.
    pub fn engagement_fraction_by(&self, age: u64) -> f64 {
        let (acc, total) = self.posts.iter().fold((0u128, 0u128), |(a, t), p| {
            (
                a + p.curve.cumulative_at(age) as u128,
                t + p.curve.total_potential as u128,
            )
        });
        if total == 0 {
            0.0
        } else {
            acc as f64 / total as f64
        }
    }

    /// Mean + 3 population standard deviations of lifetime potential.
    pub fn potential_threshold(&self) -> f64 {
        population_threshold(self.posts.iter().map(|p| p.curve.total_potential))
    }
}

pub(crate) fn population_threshold(values: impl Iterator<Item = u64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().map(|v| v as f64).sum::<f64>() / n as f64;
    let var = values.map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    mean + 3.0 * var.sqrt()
}

fn lognormal_median(median: f64, sigma: f64) -> Result<LogNormal<f64>> {
    LogNormal::new(median.ln(), sigma)
        .map_err(|e| Error::config(format!("lognormal(median {median}, sigma {sigma}): {e}")))
}

const PARTISANSHIP_WEIGHTS: [f64; 5] = [0.12, 0.28, 0.22, 0.22, 0.16];

fn draw_partisanship(rng: &mut ChaCha8Rng) -> Partisanship {
    let mut u = rng.random::<f64>();
    for (p, w) in Partisanship::ALL.into_iter().zip(PARTISANSHIP_WEIGHTS) {
        if u < w {
            return p;
        }
        u -= w;
    }
    Partisanship::FarRight
}

/// Generates the ground-truth world for `config`. Deterministic in the seed.
pub fn generate_world(config: &ScenarioConfig) -> Result<World> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eng = &config.engagement;

    let ppd_sigma = 0.6f64;
    let ppd = LogNormal::new(
        config.posts_per_day_mean.ln() - ppd_sigma * ppd_sigma / 2.0,
        ppd_sigma,
    )
    .map_err(|e| Error::config(e.to_string()))?;
    let aud = LogNormal::new(-eng.audience_sigma.powi(2) / 2.0, eng.audience_sigma)
        .map_err(|e| Error::config(e.to_string()))?;

    let mut pages = Vec::with_capacity(config.n_pages as usize);
    for i in 0..config.n_pages {
        let partisanship = draw_partisanship(&mut rng);
        let misinformation = rng.random_bool(config.misinfo_page_share);
        let posts_per_day = ppd.sample(&mut rng);
        let audience_scale = if config.homogeneous_pages {
            1.0
        } else {
            aud.sample(&mut rng)
        };
        pages.push(PageProfile {
            page_id: PageId(i as u64 + 1),
            partisanship,
            misinformation,
            posts_per_day,
            audience_scale,
        });
    }

    let nonviral_e = lognormal_median(eng.nonviral_median, eng.nonviral_sigma)?;
    let viral_e = lognormal_median(eng.viral_median, eng.viral_sigma)?;
    let nonviral_tau = lognormal_median(eng.nonviral_tau_median, eng.tau_sigma)?;
    let viral_tau = lognormal_median(eng.viral_tau_median, eng.tau_sigma)?;

    let days = config.window.len().div_ceil(DAY);
    let crisis = match config.mode {
        ScenarioMode::Crisis => config.crisis_window,
        _ => None,
    };

    let mut drafts: Vec<(SimTime, PageId, AccrualCurve, u64)> = Vec::new();
    for page in &pages {
        let daily = Poisson::new(page.posts_per_day).map_err(|e| Error::config(e.to_string()))?;
        let shared = if config.homogeneous_pages {
            let (lo, hi) = eng.homogeneous_potential;
            let e = (rng.random_range(lo..=hi) as f64 * config.engagement_scale).floor() as u64;
            Some(AccrualCurve::new(
                e,
                nonviral_tau.sample(&mut rng),
                eng.shape_k,
            )?)
        } else {
            None
        };
        for d in 0..days {
            let n = daily.sample(&mut rng) as u64;
            for _ in 0..n {
                let tod = (config.posting.start_minute
                    + (rng.random::<f64>() * config.posting.length as f64) as u64)
                    % DAY;
                let created = config.window.start.plus(d * DAY + tod);
                let curve = match shared {
                    Some(c) => c,
                    None => {
                        let viral = rng.random_bool(config.viral_mix_prob);
                        let base = if viral {
                            viral_e.sample(&mut rng)
                        } else {
                            nonviral_e.sample(&mut rng)
                        };
                        let tau = if viral {
                            viral_tau.sample(&mut rng)
                        } else {
                            nonviral_tau.sample(&mut rng)
                        };
                        let mut scale = page.audience_scale * config.engagement_scale;
                        if crisis.is_some_and(|w| w.contains(created)) {
                            scale *= config.crisis_engagement_multiplier;
                        }
                        AccrualCurve::new((base * scale).floor() as u64, tau, eng.shape_k)?
                    }
                };
                let split_seed = rng.random::<u64>();
                if created < config.window.end {
                    drafts.push((created, page.page_id, curve, split_seed));
                }
            }
        }
    }
    // Stable: ties keep page order, then draw order within the page.
    drafts.sort_by_key(|d| (d.0, d.1));
    let mut posts: Vec<PostRecord> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (created_at, page_id, curve, split_seed))| PostRecord {
            post_id: PostId(i as u64 + 1),
            page_id,
            created_at,
            curve,
            split_seed,
            removal: None,
        })
        .collect();

    assign_removals(&mut posts, &pages, config, &mut rng)?;
    Ok(World {
        window: config.window,
        pages,
        posts,
    })
}

/// Attaches removal events to freshly generated posts.
///
/// Moderation removals hit a `removal_fraction` share of posts, weighted
/// toward viral posts (2x) and misinformation pages; their delays mix a
/// fast lognormal mode with a slow heavy tail. Voluntary deletions, page
/// deletions and (in `RetroactiveWave` mode) late policy removals follow.
/// Posts of a deleted page created after the deletion are dropped.
pub fn assign_removals(
    posts: &mut Vec<PostRecord>,
    pages: &[PageProfile],
    config: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if posts.iter().any(|p| p.removal.is_some()) {
        return Err(Error::config(
            "assign_removals expects posts without removals",
        ));
    }
    if config.mode == ScenarioMode::RetroactiveWave && config.policy_change_at.is_none() {
        return Err(Error::config(
            "RetroactiveWave mode requires policy_change_at",
        ));
    }
    let d = &config.delays;
    let page_of: HashMap<PageId, &PageProfile> = pages.iter().map(|p| (p.page_id, p)).collect();

    let deleted = choose_deleted_pages(posts, pages, config, rng);
    if let Some(at) = config.page_deletion_at {
        posts.retain(|p| !(deleted.contains(&p.page_id) && p.created_at >= at));
        for p in posts.iter_mut().filter(|p| deleted.contains(&p.page_id)) {
            p.removal = Some(RemovalEvent {
                at,
                cause: RemovalCause::PageDeletion,
            });
        }
    }

    let viral_cut = population_threshold(posts.iter().map(|p| p.curve.total_potential));
    let crisis = match config.mode {
        ScenarioMode::Crisis => config.crisis_window,
        _ => None,
    };
    let weight = |p: &PostRecord| -> f64 {
        let page = page_of[&p.page_id];
        let mut w = if p.curve.total_potential as f64 >= viral_cut {
            2.0
        } else {
            1.0
        };
        if page.misinformation {
            w *= config.misinfo_removal_weight;
        }
        if let (Some(win), Some(target)) = (crisis, config.crisis_removal_target) {
            if win.contains(p.created_at) && page.partisanship == target {
                w *= config.crisis_removal_multiplier;
            }
        }
        w
    };
    let candidates: Vec<usize> = (0..posts.len())
        .filter(|&i| posts[i].removal.is_none())
        .collect();
    let mean_w = if candidates.is_empty() {
        0.0
    } else {
        candidates.iter().map(|&i| weight(&posts[i])).sum::<f64>() / candidates.len() as f64
    };

    let fast = lognormal_median(d.fast_median, d.fast_sigma)?;
    let fast_viral = lognormal_median(d.fast_median * d.viral_delay_factor, d.fast_sigma)?;
    let slow = lognormal_median(d.slow_median, d.slow_sigma)?;
    let voluntary = lognormal_median(d.voluntary_median, d.voluntary_sigma)?;

    for &i in &candidates {
        let p = &mut posts[i];
        let prob = if mean_w > 0.0 {
            (config.removal_fraction * weight(p) / mean_w).min(1.0)
        } else {
            0.0
        };
        if rng.random::<f64>() < prob {
            let delay = if rng.random_bool(d.slow_share) {
                slow.sample(rng)
            } else if p.curve.total_potential as f64 >= viral_cut {
                fast_viral.sample(rng)
            } else {
                fast.sample(rng)
            };
            p.removal = Some(RemovalEvent {
                at: p.created_at.plus((delay.round() as u64).max(1)),
                cause: RemovalCause::Moderation,
            });
        } else if rng.random::<f64>() < config.voluntary_fraction {
            let delay = voluntary.sample(rng);
            p.removal = Some(RemovalEvent {
                at: p.created_at.plus((delay.round() as u64).max(1)),
                cause: RemovalCause::Voluntary,
            });
        }
    }

    if config.mode == ScenarioMode::RetroactiveWave {
        let policy = config.policy_change_at.expect("checked above");
        let offenders: BTreeSet<PageId> = posts
            .iter()
            .filter(|p| {
                p.removal
                    .is_some_and(|r| r.cause == RemovalCause::Moderation && r.at.plus(DAY) < policy)
            })
            .map(|p| p.page_id)
            .collect();
        let earliest = SimTime(policy.0.saturating_sub(d.retro_lookback));
        for p in posts.iter_mut() {
            if p.removal.is_some()
                || !offenders.contains(&p.page_id)
                || p.created_at < earliest
                || p.created_at >= policy
            {
                continue;
            }
            let selected = rng.random::<f64>() < d.retro_fraction;
            let at = policy.plus(rng.random_range(0..d.retro_spread.max(1)));
            if selected && at.since(p.created_at) >= d.retro_min_age {
                p.removal = Some(RemovalEvent {
                    at,
                    cause: RemovalCause::RetroactivePolicy,
                });
            }
        }
    }
    Ok(())
}

fn choose_deleted_pages(
    posts: &[PostRecord],
    pages: &[PageProfile],
    config: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<PageId> {
    let Some(at) = config.page_deletion_at else {
        return BTreeSet::new();
    };
    if config.page_deletions == 0 {
        return BTreeSet::new();
    }
    let mut counts: HashMap<PageId, usize> = HashMap::new();
    for p in posts.iter().filter(|p| p.created_at < at) {
        *counts.entry(p.page_id).or_default() += 1;
    }
    // Large enough to be recognisable as a page deletion downstream.
    let eligible: Vec<PageId> = pages
        .iter()
        .map(|p| p.page_id)
        .filter(|id| counts.get(id).copied().unwrap_or(0) >= 20)
        .collect();
    let k = (config.page_deletions as usize).min(eligible.len());
    sample(rng, eligible.len(), k)
        .into_iter()
        .map(|i| eligible[i])
        .collect()
}

#[derive(Serialize, Deserialize)]
struct GroundTruthMeta {
    tool: String,
    version: String,
    seed: u64,
    window: TimeWindow,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthLine {
    post_id: u64,
    page_id: u64,
    created_at: u64,
    total_potential: u64,
    tau: f64,
    shape_k: f64,
    split_seed: u64,
    removal: Option<RemovalEvent>,
}

/// Writes `ground_truth.ndjson`: a `{"_meta": ...}` line, then one post per line.
pub fn write_ground_truth<W: Write>(mut out: W, world: &World, seed: u64) -> Result<()> {
    let meta = GroundTruthMeta {
        tool: crate::TOOL_NAME.to_string(),
        version: crate::VERSION.to_string(),
        seed,
        window: world.window,
    };
    let path = "ground_truth.ndjson";
    serde_json::to_writer(&mut out, &serde_json::json!({ "_meta": meta }))?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    for p in &world.posts {
        serde_json::to_writer(
            &mut out,
            &GroundTruthLine {
                post_id: p.post_id.0,
                page_id: p.page_id.0,
                created_at: p.created_at.0,
                total_potential: p.curve.total_potential,
                tau: p.curve.tau,
                shape_k: p.curve.shape_k,
                split_seed: p.split_seed,
                removal: p.removal,
            },
        )?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a ground-truth file back into a [`World`] using the given pages.
pub fn read_ground_truth<R: BufRead>(input: R, mut pages: Vec<PageProfile>) -> Result<World> {
    let path = "ground_truth.ndjson";
    let mut window = None;
    let mut posts = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with("{\"_meta\"") {
            let v: serde_json::Value = serde_json::from_str(&line)?;
            let meta: GroundTruthMeta = serde_json::from_value(v["_meta"].clone())?;
            window = Some(meta.window);
            continue;
        }
        let g: GroundTruthLine = serde_json::from_str(&line)?;
        posts.push(PostRecord {
            post_id: PostId(g.post_id),
            page_id: PageId(g.page_id),
            created_at: SimTime(g.created_at),
            curve: AccrualCurve::new(g.total_potential, g.tau, g.shape_k)?,
            split_seed: g.split_seed,
            removal: g.removal,
        });
    }
    let window = window.ok_or_else(|| Error::config("ground truth file lacks a _meta line"))?;
    posts.sort_by_key(|p| (p.created_at, p.post_id));
    pages.sort_by_key(|p| p.page_id);
    Ok(World {
        window,
        pages,
        posts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::HOUR;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            n_pages: 40,
            window: TimeWindow::days(0, 10),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_world(&small(42)).unwrap();
        let b = generate_world(&small(42)).unwrap();
        assert_eq!(a, b);
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_ground_truth(&mut ba, &a, 42).unwrap();
        write_ground_truth(&mut bb, &b, 42).unwrap();
        assert_eq!(ba, bb);
        let c = generate_world(&small(43)).unwrap();
        assert_ne!(a.posts, c.posts);
    }

    #[test]
    fn zero_removal_fraction_means_no_removals() {
        let cfg = ScenarioConfig {
            removal_fraction: 0.0,
            voluntary_fraction: 0.0,
            ..small(1)
        };
        let w = generate_world(&cfg).unwrap();
        assert!(!w.posts.is_empty());
        assert!(w.posts.iter().all(|p| p.removal.is_none()));
    }

    #[test]
    fn posts_are_well_formed() {
        let w = generate_world(&small(5)).unwrap();
        assert_eq!(w.pages.len(), 40);
        for p in &w.posts {
            assert!(w.window.contains(p.created_at));
            if let Some(r) = p.removal {
                assert!(r.at >= p.created_at);
            }
        }
        assert!(w
            .posts
            .windows(2)
            .all(|x| x[0].post_id < x[1].post_id && x[0].created_at <= x[1].created_at));
    }

    #[test]
    fn page_deletion_shares_one_timestamp() {
        let at = SimTime(6 * DAY + 3 * HOUR);
        let cfg = ScenarioConfig {
            page_deletions: 1,
            page_deletion_at: Some(at),
            posts_per_day_mean: 10.0,
            ..small(9)
        };
        let w = generate_world(&cfg).unwrap();
        let deleted: BTreeSet<PageId> = w
            .posts
            .iter()
            .filter(|p| {
                p.removal
                    .is_some_and(|r| r.cause == RemovalCause::PageDeletion)
            })
            .map(|p| p.page_id)
            .collect();
        assert_eq!(deleted.len(), 1);
        let page = *deleted.iter().next().unwrap();
        let page_posts: Vec<_> = w.posts.iter().filter(|p| p.page_id == page).collect();
        assert!(page_posts.len() >= 20);
        for p in page_posts {
            assert!(p.created_at < at);
            assert_eq!(
                p.removal,
                Some(RemovalEvent {
                    at,
                    cause: RemovalCause::PageDeletion
                })
            );
        }
    }

    #[test]
    fn retroactive_removals_are_old_and_after_policy() {
        let cfg = ScenarioConfig {
            n_pages: 200,
            ..ScenarioConfig::retroactive_wave()
        };
        let w = generate_world(&cfg).unwrap();
        let policy = cfg.policy_change_at.unwrap();
        let retro: Vec<_> = w
            .posts
            .iter()
            .filter(|p| {
                p.removal
                    .is_some_and(|r| r.cause == RemovalCause::RetroactivePolicy)
            })
            .collect();
        assert!(!retro.is_empty());
        for p in retro {
            let r = p.removal.unwrap();
            assert!(r.at >= policy);
            assert!(r.at.since(p.created_at) >= 6 * DAY);
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let cfg = ScenarioConfig {
            n_pages: 0,
            ..small(1)
        };
        assert!(generate_world(&cfg).is_err());
        let mut posts = generate_world(&small(2)).unwrap().posts;
        posts[0].removal = Some(RemovalEvent {
            at: posts[0].created_at,
            cause: RemovalCause::Voluntary,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(assign_removals(&mut posts, &[], &small(2), &mut rng).is_err());
    }

    #[test]
    fn ground_truth_round_trip() {
        let w = generate_world(&small(11)).unwrap();
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &w, 11).unwrap();
        let back = read_ground_truth(buf.as_slice(), w.pages.clone()).unwrap();
        assert_eq!(back.window, w.window);
        for (a, b) in back.posts.iter().zip(&w.posts) {
            assert_eq!(a, b);
        }
        assert_eq!(back.posts.len(), w.posts.len());
        let first = std::str::from_utf8(&buf).unwrap().lines().nth(1).unwrap();
        for key in [
            "\"post_id\"",
            "\"page_id\"",
            "\"created_at\"",
            "\"total_potential\"",
            "\"tau\"",
            "\"shape_k\"",
            "\"split_seed\"",
            "\"removal\"",
        ] {
            assert!(first.contains(key), "{key} missing from {first}");
        }
    }
}

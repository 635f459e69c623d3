use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Partisanship;
use crate::time::{SimTime, TimeWindow, DAY, HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioMode {
    /// Steady-state moderation.
    Baseline,
    /// Engagement inflated inside `crisis_window`; removal volume unchanged.
    Crisis,
    /// A policy change at `policy_change_at` triggers late removals of older posts.
    RetroactiveWave,
}

/// Lifetime-engagement and accrual-speed distributions.
///
/// Lifetime engagement is a two-component lognormal mixture multiplied by
/// the page's audience scale. Accrual curves draw `tau` per post from a
/// lognormal whose median depends on the component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementParams {
    pub nonviral_median: f64,
    pub nonviral_sigma: f64,
    pub viral_median: f64,
    pub viral_sigma: f64,
    /// Lognormal sigma of per-page audience scale (mean fixed at 1).
    pub audience_sigma: f64,
    pub nonviral_tau_median: f64,
    pub viral_tau_median: f64,
    pub tau_sigma: f64,
    pub shape_k: f64,
    /// Range of the shared page potential in homogeneous mode.
    pub homogeneous_potential: (u64, u64),
}

impl Default for EngagementParams {
    fn default() -> Self {
        Self {
            nonviral_median: 452.0,
            nonviral_sigma: 0.9,
            viral_median: 30_800.0,
            viral_sigma: 0.35,
            audience_sigma: 0.3,
            nonviral_tau_median: 690.0,
            viral_tau_median: 955.0,
            tau_sigma: 0.5,
            shape_k: 4.0,
            homogeneous_potential: (200, 2000),
        }
    }
}

/// Removal-delay distributions, all in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayParams {
    pub fast_median: f64,
    pub fast_sigma: f64,
    /// Multiplier on `fast_median` for viral posts.
    pub viral_delay_factor: f64,
    /// Share of moderation removals drawn from the slow component.
    pub slow_share: f64,
    pub slow_median: f64,
    pub slow_sigma: f64,
    pub voluntary_median: f64,
    pub voluntary_sigma: f64,
    /// Retroactive removals land in `[policy, policy + retro_spread)`.
    pub retro_spread: u64,
    /// Minimum post age at retroactive removal.
    pub retro_min_age: u64,
    /// Posts created up to this long before the policy change are eligible.
    pub retro_lookback: u64,
    pub retro_fraction: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self {
            fast_median: 31.0 * HOUR as f64,
            fast_sigma: 0.08,
            viral_delay_factor: 24.0 / 21.0,
            slow_share: 0.10,
            slow_median: 5.0 * DAY as f64,
            slow_sigma: 1.2,
            voluntary_median: 2.4 * DAY as f64,
            voluntary_sigma: 1.49,
            retro_spread: 3 * DAY,
            retro_min_age: 6 * DAY,
            retro_lookback: 10 * DAY,
            retro_fraction: 0.05,
        }
    }
}

/// Daily interval in which posts are published, as minute-of-day start and
/// length. May wrap past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostingWindow {
    pub start_minute: u64,
    pub length: u64,
}

impl Default for PostingWindow {
    fn default() -> Self {
        Self {
            start_minute: 21 * HOUR,
            length: 13 * HOUR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_pages: u32,
    pub window: TimeWindow,
    pub mode: ScenarioMode,
    /// Expected share of posts receiving a moderation removal.
    pub removal_fraction: f64,
    pub viral_mix_prob: f64,
    pub engagement_scale: f64,
    pub policy_change_at: Option<SimTime>,
    pub voluntary_fraction: f64,
    /// Relative removal propensity of misinformation pages.
    pub misinfo_removal_weight: f64,
    pub misinfo_page_share: f64,
    pub posts_per_day_mean: f64,
    /// Number of pages deleted outright at `page_deletion_at`.
    pub page_deletions: u32,
    pub page_deletion_at: Option<SimTime>,
    pub crisis_window: Option<TimeWindow>,
    pub crisis_engagement_multiplier: f64,
    /// Partisanship bucket whose crisis-window posts get extra removal weight.
    pub crisis_removal_target: Option<Partisanship>,
    pub crisis_removal_multiplier: f64,
    /// Every post on a page shares one accrual curve.
    pub homogeneous_pages: bool,
    pub engagement: EngagementParams,
    pub delays: DelayParams,
    pub posting: PostingWindow,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_pages: 800,
            window: TimeWindow::days(0, 33),
            mode: ScenarioMode::Baseline,
            removal_fraction: 0.0028,
            viral_mix_prob: 0.0072,
            engagement_scale: 1.0,
            policy_change_at: None,
            voluntary_fraction: 0.000_05,
            misinfo_removal_weight: 4.0,
            misinfo_page_share: 0.15,
            posts_per_day_mean: 8.0,
            page_deletions: 0,
            page_deletion_at: None,
            crisis_window: None,
            crisis_engagement_multiplier: 1.5,
            crisis_removal_target: None,
            crisis_removal_multiplier: 1.0,
            homogeneous_pages: false,
            engagement: EngagementParams::default(),
            delays: DelayParams::default(),
            posting: PostingWindow::default(),
        }
    }
}

impl ScenarioConfig {
    /// Engagement surge in days 21..29 with removals skewed toward one bucket.
    pub fn crisis() -> Self {
        Self {
            mode: ScenarioMode::Crisis,
            crisis_window: Some(TimeWindow::days(21, 29)),
            crisis_removal_target: Some(Partisanship::FarRight),
            crisis_removal_multiplier: 4.0,
            ..Self::default()
        }
    }

    /// Policy change on day 29 followed by late removals, plus two page deletions.
    pub fn retroactive_wave() -> Self {
        Self {
            mode: ScenarioMode::RetroactiveWave,
            policy_change_at: Some(SimTime::from_minutes(29 * DAY)),
            page_deletions: 2,
            page_deletion_at: Some(SimTime::from_minutes(29 * DAY + 6 * HOUR)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.is_empty() {
            return Err(Error::config("generation window has zero length"));
        }
        if self.n_pages == 0 {
            return Err(Error::config("n_pages must be positive"));
        }
        for (name, v) in [
            ("removal_fraction", self.removal_fraction),
            ("viral_mix_prob", self.viral_mix_prob),
            ("voluntary_fraction", self.voluntary_fraction),
            ("misinfo_page_share", self.misinfo_page_share),
            ("delays.slow_share", self.delays.slow_share),
            ("delays.retro_fraction", self.delays.retro_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("engagement_scale", self.engagement_scale),
            ("posts_per_day_mean", self.posts_per_day_mean),
            ("misinfo_removal_weight", self.misinfo_removal_weight),
            (
                "crisis_engagement_multiplier",
                self.crisis_engagement_multiplier,
            ),
            ("crisis_removal_multiplier", self.crisis_removal_multiplier),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.posts_per_day_mean <= 0.0 {
            return Err(Error::config("posts_per_day_mean must be positive"));
        }
        if self.posting.length == 0 || self.posting.length > DAY {
            return Err(Error::config(
                "posting window length must lie in (0, 1 day]",
            ));
        }
        let (lo, hi) = self.engagement.homogeneous_potential;
        if lo > hi {
            return Err(Error::config("homogeneous_potential range is inverted"));
        }
        match self.mode {
            ScenarioMode::RetroactiveWave if self.policy_change_at.is_none() => {
                return Err(Error::config(
                    "RetroactiveWave mode requires policy_change_at",
                ));
            }
            ScenarioMode::Crisis if self.crisis_window.is_none() => {
                return Err(Error::config("Crisis mode requires crisis_window"));
            }
            _ => {}
        }
        if self.page_deletions > 0 && self.page_deletion_at.is_none() {
            return Err(Error::config("page_deletions requires page_deletion_at"));
        }
        if self.page_deletions > self.n_pages {
            return Err(Error::config("page_deletions exceeds n_pages"));
        }
        Ok(())
    }
}

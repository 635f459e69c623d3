//! Run several crawl schedules against one world and compare what each
//! one misses and how tight its lifetime bounds are.

use takedown::crawl::CrawlSchedule;
use takedown::report::compare_schedules;
use takedown::sim::{generate_world, ScenarioConfig};

fn main() -> takedown::Result<()> {
    let world = generate_world(&ScenarioConfig::default())?;
    let w = world.window;
    let schedules = vec![
        ("daily".to_string(), CrawlSchedule::daily(w)),
        (
            "hourly-history".to_string(),
            CrawlSchedule::hourly_history(w),
        ),
        (
            "hourly-discovery".to_string(),
            CrawlSchedule::hourly_discovery(w),
        ),
        (
            "daily, small budget".to_string(),
            CrawlSchedule {
                history_budget: 2_000,
                ..CrawlSchedule::daily(w)
            },
        ),
    ];
    for r in compare_schedules(&world, &schedules)? {
        println!(
            "{:<20} seen={:<5} missed={:<5} slack={:>7} visits={}",
            r.schedule,
            r.removed_observed,
            r.missed_removals,
            r.mean_slack_min
                .map_or("-".into(), |s| format!("{:.1}h", s / 60.0)),
            r.crawl_visits
        );
    }
    Ok(())
}

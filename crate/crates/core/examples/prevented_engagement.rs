//! Estimate how much engagement each removal prevented, per period.

use takedown::crawl::{run_crawls, CrawlSchedule, TimeSeriesSet};
use takedown::inference::{detect_page_deletions, detect_removed, PeriodKey};
use takedown::metrics::{compute_metrics, MetricsOptions};
use takedown::sim::{generate_world, ScenarioConfig};
use takedown::time::{default_step_grid, Periods, DAY};
use takedown::RunMeta;

fn main() -> takedown::Result<()> {
    let cfg = ScenarioConfig::retroactive_wave();
    let world = generate_world(&cfg)?;
    let schedule = CrawlSchedule::daily(world.window);
    let log = run_crawls(&world, &schedule)?;
    let periods = Periods::standard(world.window.start, schedule.crawl_until.plus(1))?;
    let mut removed = detect_removed(&log, &periods, PeriodKey::LastObserved)?;
    let deleted = detect_page_deletions(&mut removed, 20, DAY);
    println!("pages that vanished at once: {deleted:?}");
    let series = TimeSeriesSet::from_world(&world, &log, &default_step_grid())?;
    let m = compute_metrics(
        &series,
        &removed,
        &periods,
        MetricsOptions::default(),
        RunMeta::new(cfg.seed),
    )?;

    println!("viral threshold {:.0}", m.threshold.threshold);
    println!(
        "{:<14}{:>7}{:>12}{:>10}{:>12}",
        "bucket", "n", "prevented", "rate", "delayed"
    );
    for s in &m.report.summaries {
        println!(
            "{:<14}{:>7}{:>12.0}{:>9.2}%{:>11.3}%",
            s.bucket,
            s.all.n,
            s.all.prevented,
            100.0 * s.all.aggregate_rate,
            100.0 * s.delayed.aggregate_rate
        );
    }
    Ok(())
}

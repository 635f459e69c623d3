//! Pretend surviving posts were removed at realistic ages and compare the
//! predicted lifetime engagement with the truth.

use takedown::crawl::{run_crawls, CrawlSchedule, TimeSeriesSet};
use takedown::inference::{detect_removed, PeriodKey};
use takedown::metrics::{baseline_rows, compute_metrics, MetricsOptions};
use takedown::sim::{generate_world, ScenarioConfig};
use takedown::time::{default_step_grid, Periods};
use takedown::validation::{validate_estimators, ValidationOptions};
use takedown::RunMeta;

fn main() -> takedown::Result<()> {
    let world = generate_world(&ScenarioConfig::default())?;
    let schedule = CrawlSchedule::daily(world.window);
    let log = run_crawls(&world, &schedule)?;
    let periods = Periods::standard(world.window.start, schedule.crawl_until.plus(1))?;
    let removed = detect_removed(&log, &periods, PeriodKey::LastObserved)?;
    let series = TimeSeriesSet::from_world(&world, &log, &default_step_grid())?;
    let m = compute_metrics(
        &series,
        &removed,
        &periods,
        MetricsOptions::default(),
        RunMeta::new(42),
    )?;

    let lifetimes: Vec<u64> = removed.records.iter().map(|r| r.lifetime_lb).collect();
    let rows = baseline_rows(&series, &periods);
    let report = validate_estimators(
        &rows,
        &m.index,
        &lifetimes,
        &ValidationOptions::default(),
        RunMeta::new(42),
    )?;
    println!("accuracy = {}", report.accuracy_definition);
    for (name, c) in [("nonviral", report.nonviral), ("viral", report.viral)] {
        println!(
            "{name:<9} n={:<6} net error {:.2}%  mean accuracy {:.3}",
            c.n,
            100.0 * c.net_error,
            c.accuracy_mean
        );
    }
    Ok(())
}

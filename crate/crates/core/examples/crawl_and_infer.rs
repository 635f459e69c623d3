//! Crawl a world once a day, infer removals from what disappeared by the
//! follow-up, and check the lifetime bounds against ground truth.

use takedown::crawl::{run_crawls, CrawlSchedule};
use takedown::inference::{detect_removed, PeriodKey};
use takedown::sim::{generate_world, ScenarioConfig};
use takedown::time::{Periods, HOUR};

fn main() -> takedown::Result<()> {
    let world = generate_world(&ScenarioConfig {
        n_pages: 300,
        ..ScenarioConfig::default()
    })?;
    let schedule = CrawlSchedule::daily(world.window);
    let log = run_crawls(&world, &schedule)?;
    let periods = Periods::standard(world.window.start, schedule.crawl_until.plus(1))?;
    let removed = detect_removed(&log, &periods, PeriodKey::LastObserved)?;

    let mut lbs: Vec<u64> = removed.records.iter().map(|r| r.lifetime_lb).collect();
    lbs.sort_unstable();
    println!(
        "{} observations, {} removed posts",
        log.observations().len(),
        removed.len()
    );
    if let Some(m) = lbs.get(lbs.len() / 2) {
        println!(
            "median lifetime lower bound: {:.1} h",
            *m as f64 / HOUR as f64
        );
    }
    println!(
        "share removed within 30 h: {:.3}",
        lbs.iter().filter(|&&l| l <= 30 * HOUR).count() as f64 / lbs.len().max(1) as f64
    );

    // Removals after the last crawl tick are bounded only by the follow-up.
    let mut slack = Vec::new();
    for r in &removed.records {
        let post = world.post(r.post_id).expect("known post");
        let event = post.removal.expect("only true removals are inferred");
        let truth = post.removal_delay().unwrap_or_default();
        assert!(r.lifetime_lb <= truth);
        if event.at <= schedule.crawl_until {
            slack.push((truth - r.lifetime_lb) as f64);
        }
    }
    println!(
        "mean slack (true delay - bound): {:.1} h",
        slack.iter().sum::<f64>() / slack.len().max(1) as f64 / HOUR as f64
    );
    for (name, recs) in removed.partition() {
        println!("  {name}: {}", recs.len());
    }
    Ok(())
}

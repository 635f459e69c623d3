//! Export a crawl as CSV, damage a few rows, and load it back through the
//! permissive ingest adapter.

use takedown::crawl::{
    ingest_snapshots, run_crawls, write_followup_csv, write_observations_csv, CrawlSchedule,
    IngestOptions,
};
use takedown::model::write_pages_csv;
use takedown::sim::{generate_world, ScenarioConfig};
use takedown::time::TimeWindow;

fn main() -> takedown::Result<()> {
    let world = generate_world(&ScenarioConfig {
        n_pages: 40,
        window: TimeWindow::days(0, 5),
        ..ScenarioConfig::default()
    })?;
    let log = run_crawls(&world, &CrawlSchedule::daily(world.window))?;

    let mut obs = Vec::new();
    write_observations_csv(&mut obs, "example", &log)?;
    let mut followup = Vec::new();
    write_followup_csv(&mut followup, "example", &log)?;
    let mut pages = Vec::new();
    write_pages_csv(&mut pages, "example", &world.pages)?;

    // Corrupt two rows: a non-numeric count and an unknown page.
    let mut text = String::from_utf8(obs).expect("csv is utf-8");
    let lines: Vec<&str> = text.lines().collect();
    let bad = lines[5].replacen(",Discovery,", ",Discovery,x", 1);
    let mut fields: Vec<String> = lines[9].split(',').map(String::from).collect();
    fields[1] = "999999".into();
    text = text
        .replacen(lines[5], &bad, 1)
        .replacen(lines[9], &fields.join(","), 1);

    let out = ingest_snapshots(
        text.as_bytes(),
        followup.as_slice(),
        pages.as_slice(),
        IngestOptions::default(),
    )?;
    println!(
        "{} rows read, {} accepted observations, {} rejected",
        out.total_rows,
        out.log.observations().len(),
        out.rejected.len()
    );
    for r in &out.rejected {
        println!("  {}:{} {}", r.file, r.line, r.reason);
    }
    Ok(())
}

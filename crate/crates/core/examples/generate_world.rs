//! Generate the default world and print the engagement-speed numbers it
//! was calibrated against.

use takedown::sim::{generate_world, ScenarioConfig};
use takedown::time::{DAY, HOUR};

fn main() -> takedown::Result<()> {
    let world = generate_world(&ScenarioConfig::default())?;
    let threshold = world.potential_threshold();
    println!("{} pages, {} posts", world.pages.len(), world.posts.len());
    println!("viral threshold: {threshold:.0}");
    println!(
        "engagement accrued by 30 h: {:.3}",
        world.engagement_fraction_by(30 * HOUR)
    );

    let mut hits = [(0usize, 0usize); 2];
    for p in &world.posts {
        let total = p.curve.total_potential;
        if total == 0 {
            continue;
        }
        let class = &mut hits[(total as f64 >= threshold) as usize];
        class.0 += 1;
        class.1 += (p.curve.cumulative_at(DAY) as f64 >= 0.8 * total as f64) as usize;
    }
    for (name, (n, fast)) in ["nonviral", "viral"].iter().zip(hits) {
        println!(
            "{name}: {:.3} reach 80% within a day (n={n})",
            fast as f64 / n as f64
        );
    }

    let mut causes = std::collections::BTreeMap::new();
    for r in world.posts.iter().filter_map(|p| p.removal) {
        *causes.entry(format!("{:?}", r.cause)).or_insert(0) += 1;
    }
    println!("removals by cause: {causes:?}");
    Ok(())
}

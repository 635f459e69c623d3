//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use takedown::crawl::{
    ingest_snapshots, read_timeseries_csv, run_crawls, run_crawls_into, write_followup_csv,
    write_observations_csv, write_timeseries_csv, CrawlSchedule, IngestOptions, ObservationLog,
    SummarySink, TimeSeriesSet,
};
use takedown::inference::RemovedSet;
use takedown::metrics::{
    baseline_rows, compute_metrics, median_test, prevented_engagement, time_to_fraction,
    welch_t_test, MetricsOptions, MetricsOutput, ViralRule,
};
use takedown::model::write_pages_csv;
use takedown::pipeline::{cmd_run_all, infer, RunConfig};
use takedown::sim::{generate_world, RemovalCause, ScenarioConfig, World, LONG_RUN_HORIZON};
use takedown::time::{TimeWindow, DAY, HOUR};
use takedown::validation::{validate_estimators, ValidationOptions};
use takedown::RunMeta;

type Outcome = Result<String, String>;
/// (a, b, welch t, welch df, welch p, mood chi2, mood p)
type StatCase = (&'static [f64], &'static [f64], f64, f64, f64, f64, f64);
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// One world pushed through the daily pipeline in memory.
struct Analysed {
    world: World,
    schedule: CrawlSchedule,
    cfg: RunConfig,
    log: ObservationLog,
    removed: RemovedSet,
    series: TimeSeriesSet,
    metrics: MetricsOutput,
}

fn analyse(scenario: ScenarioConfig) -> Analysed {
    let cfg = RunConfig {
        scenario,
        ..RunConfig::default()
    };
    let world = generate_world(&cfg.scenario).unwrap();
    let schedule = cfg.schedule().unwrap();
    let log = run_crawls(&world, &schedule).unwrap();
    let removed = infer(&log, &cfg).unwrap();
    let series = TimeSeriesSet::from_world(&world, &log, &cfg.grid().unwrap()).unwrap();
    let metrics = compute_metrics(
        &series,
        &removed,
        &cfg.periods().unwrap(),
        cfg.metrics_options(),
        cfg.meta(),
    )
    .unwrap();
    Analysed {
        world,
        schedule,
        cfg,
        log,
        removed,
        series,
        metrics,
    }
}

fn c1_engagement_speed(gen_secs: f64, d: &Analysed) -> Outcome {
    let n = d.world.posts.len();
    let f = d.world.engagement_fraction_by(30 * HOUR);
    check(
        n >= 200_000 && (f - 0.90).abs() <= 0.02 && gen_secs < 60.0,
        format!("{n} posts, fraction by 30 h = {f:.4} (0.90 ± 0.02), generated in {gen_secs:.2} s (< 60 s)"),
    )
}

fn c2_time_to_80(d: &Analysed) -> Outcome {
    let rows = baseline_rows(&d.series, &d.cfg.periods().unwrap());
    let thr = d.metrics.threshold.threshold;
    let share = |viral: bool| {
        let class: Vec<_> = rows
            .iter()
            .filter(|r| r.long_run() > 0 && (r.long_run() as f64 >= thr) == viral)
            .collect();
        let fast = class
            .iter()
            .filter(|r| time_to_fraction(&r.values, &d.series.grid, 0.8).is_some_and(|t| t <= DAY))
            .count();
        (fast as f64 / class.len() as f64, class.len())
    };
    let (nv, n_nv) = share(false);
    let (v, n_v) = share(true);
    check(
        (nv - 0.78).abs() <= 0.04 && (v - 0.55).abs() <= 0.06,
        format!("non-viral {nv:.4} (0.78 ± 0.04, n={n_nv}), viral {v:.4} (0.55 ± 0.06, n={n_v})"),
    )
}

fn c3_removal_delays(d: &Analysed) -> Outcome {
    let mut lbs: Vec<u64> = d.removed.records.iter().map(|r| r.lifetime_lb).collect();
    lbs.sort_unstable();
    let n = lbs.len();
    let median_h = if n % 2 == 1 {
        lbs[n / 2] as f64
    } else {
        (lbs[n / 2 - 1] + lbs[n / 2]) as f64 / 2.0
    } / HOUR as f64;
    let within = lbs.iter().filter(|&&l| l <= 30 * HOUR).count() as f64 / n as f64;
    check(
        (20.0..=22.0).contains(&median_h) && (within - 0.90).abs() <= 0.03,
        format!("median lifetime bound {median_h:.2} h ([20, 22]), share ≤ 30 h {within:.4} (0.90 ± 0.03), n={n}"),
    )
}

fn matrix_worlds() -> Vec<(&'static str, ScenarioConfig)> {
    let small = |seed| ScenarioConfig {
        seed,
        n_pages: 50,
        removal_fraction: 0.03,
        voluntary_fraction: 0.01,
        ..ScenarioConfig::default()
    };
    vec![
        ("baseline-1", small(1)),
        (
            "baseline-short",
            ScenarioConfig {
                window: TimeWindow::days(0, 9),
                ..small(2)
            },
        ),
        (
            "round-the-clock",
            ScenarioConfig {
                posting: takedown::sim::PostingWindow {
                    start_minute: 0,
                    length: DAY,
                },
                ..small(3)
            },
        ),
        (
            "crisis",
            ScenarioConfig {
                seed: 4,
                n_pages: 50,
                removal_fraction: 0.03,
                ..ScenarioConfig::crisis()
            },
        ),
        (
            "retroactive",
            ScenarioConfig {
                seed: 5,
                n_pages: 60,
                removal_fraction: 0.03,
                ..ScenarioConfig::retroactive_wave()
            },
        ),
        (
            "homogeneous",
            ScenarioConfig {
                homogeneous_pages: true,
                ..small(6)
            },
        ),
    ]
}

fn matrix_schedules(w: TimeWindow) -> Vec<(&'static str, CrawlSchedule, bool)> {
    // Follow-up right after the last tick: every removal lands between two
    // observations, so both bounds are checkable for all of them.
    let tight = |s: CrawlSchedule| CrawlSchedule {
        followup_at: s.crawl_until.plus(1),
        ..s
    };
    vec![
        ("daily", tight(CrawlSchedule::daily(w)), true),
        ("hourly", tight(CrawlSchedule::hourly(w)), true),
        (
            "hourly-history",
            tight(CrawlSchedule::hourly_history(w)),
            true,
        ),
        (
            "hourly-discovery",
            tight(CrawlSchedule::hourly_discovery(w)),
            true,
        ),
        (
            "odd-intervals",
            tight(CrawlSchedule {
                discovery_interval: 5 * HOUR,
                history_interval: 7 * HOUR + 13,
                start_offset: 13,
                ..CrawlSchedule::daily(w)
            }),
            true,
        ),
        ("daily-late-followup", CrawlSchedule::daily(w), true),
        (
            "budget-50",
            CrawlSchedule {
                history_budget: 50,
                ..CrawlSchedule::daily(w)
            },
            false,
        ),
    ]
}

fn c4_inference_bounds() -> Outcome {
    let mut runs = 0;
    let mut records = 0;
    let mut upper_checked = 0;
    let mut failures = Vec::new();
    for (wname, scenario) in matrix_worlds() {
        let cfg = RunConfig {
            scenario,
            ..RunConfig::default()
        };
        let world = generate_world(&cfg.scenario).unwrap();
        for (sname, schedule, full_budget) in matrix_schedules(world.window) {
            runs += 1;
            let log = run_crawls(&world, &schedule).unwrap();
            let periods =
                takedown::time::Periods::standard(world.window.start, schedule.crawl_until.plus(1))
                    .unwrap();
            let removed =
                takedown::inference::detect_removed(&log, &periods, Default::default()).unwrap();
            let last_tick = schedule.history_ticks(world.window).last().unwrap();
            let mut fail = |msg: String| failures.push(format!("{wname}/{sname}: {msg}"));
            for r in &removed.records {
                records += 1;
                let post = world.post(r.post_id).unwrap();
                let Some(ev) = post.removal.filter(|e| e.at <= schedule.followup_at) else {
                    fail(format!("false positive {}", r.post_id));
                    continue;
                };
                let delay = ev.at.since(post.created_at);
                if r.lifetime_lb > delay {
                    fail(format!(
                        "{} bound {} > delay {delay}",
                        r.post_id, r.lifetime_lb
                    ));
                }
                // Past the last tick only the follow-up bounds a removal.
                if full_budget && ev.at <= last_tick {
                    upper_checked += 1;
                    if delay > r.lifetime_lb + schedule.history_interval {
                        fail(format!(
                            "{} delay {delay} > bound {} + {}",
                            r.post_id, r.lifetime_lb, schedule.history_interval
                        ));
                    }
                }
            }
            // Completeness: every observed post gone by follow-up is found.
            let observed: std::collections::BTreeSet<_> =
                log.observations().iter().map(|o| o.post_id).collect();
            for p in &world.posts {
                if observed.contains(&p.post_id)
                    && !p.exists_at(schedule.followup_at)
                    && removed.get(p.post_id).is_none()
                {
                    fail(format!("missed removal {}", p.post_id));
                }
            }
        }
    }
    let detail = format!(
        "{runs} world×schedule runs, {records} inferred removals, {upper_checked} upper bounds checked, {} violations",
        failures.len()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; first: {}", failures[0]))
    }
}

fn c5_homogeneous_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    let mut net = Vec::new();
    for seed in [11, 12, 13] {
        let d = analyse(ScenarioConfig {
            seed,
            n_pages: 120,
            removal_fraction: 0.02,
            homogeneous_pages: true,
            ..ScenarioConfig::default()
        });
        let grid = &d.series.grid;
        for r in &d.removed.records {
            let curve = d.world.post(r.post_id).unwrap().curve;
            let anchor = grid
                .floor_index(r.lifetime_lb)
                .map_or(0, |i| curve.cumulative_at(grid.offsets()[i]));
            let truth_tail = (curve.cumulative_at(LONG_RUN_HORIZON) - anchor) as f64;
            let got = prevented_engagement(r, &d.metrics.index, ViralRule::ObservedTotal).prevented;
            worst = worst.max((got - truth_tail).abs());
            n += 1;
        }
        let rows = baseline_rows(&d.series, &d.cfg.periods().unwrap());
        let lifetimes: Vec<u64> = d.removed.records.iter().map(|r| r.lifetime_lb).collect();
        let rep = validate_estimators(
            &rows,
            &d.metrics.index,
            &lifetimes,
            &ValidationOptions {
                n: 3000,
                ..ValidationOptions::default()
            },
            RunMeta::new(seed),
        )
        .unwrap();
        net.push(rep.nonviral.net_error.max(rep.viral.net_error));
    }
    let max_net = net.iter().cloned().fold(0.0, f64::max);
    check(
        n > 0 && worst <= 1.0 && max_net < 1e-12,
        format!("{n} removals, max |estimate - true tail| = {worst} (≤ 1), max net error {max_net:e} (= 0)"),
    )
}

fn c6_validation(d: &Analysed) -> Outcome {
    let rows = baseline_rows(&d.series, &d.cfg.periods().unwrap());
    let lifetimes: Vec<u64> = d.removed.records.iter().map(|r| r.lifetime_lb).collect();
    let rep = validate_estimators(
        &rows,
        &d.metrics.index,
        &lifetimes,
        &ValidationOptions::default(),
        RunMeta::new(42),
    )
    .unwrap();
    check(
        rep.n_samples == 10_000 && rep.nonviral.net_error <= 0.05 && rep.viral.net_error <= 0.08,
        format!(
            "n={}, non-viral net error {:.4} (≤ 0.05, n={}), viral {:.4} (≤ 0.08, n={})",
            rep.n_samples, rep.nonviral.net_error, rep.nonviral.n, rep.viral.net_error, rep.viral.n
        ),
    )
}

fn c7_retroactive_wave() -> Outcome {
    let d = analyse(ScenarioConfig::retroactive_wave());
    let jan12_delayed: Vec<_> = d
        .metrics
        .results
        .iter()
        .filter(|r| r.bucket == takedown::time::PeriodName::Jan12 && r.delayed)
        .collect();
    let rate = |rs: &[&takedown::metrics::PreventionResult]| {
        rs.iter().map(|r| r.prevented).sum::<f64>() / rs.iter().map(|r| r.potential).sum::<f64>()
    };
    let wave_rate = rate(&jan12_delayed);
    let retro = jan12_delayed
        .iter()
        .filter(|r| {
            d.world
                .post(r.post_id)
                .and_then(|p| p.removal)
                .map(|e| e.cause)
                == Some(RemovalCause::RetroactivePolicy)
        })
        .count();
    let old: Vec<_> = d
        .metrics
        .results
        .iter()
        .filter(|r| r.lifetime_lb >= 6 * DAY)
        .collect();
    let old_rate = rate(&old);
    check(
        wave_rate < 0.015 && old_rate < 0.015 && retro * 2 > jan12_delayed.len(),
        format!(
            "delayed Jan12 removals: {} ({} retroactive), prevention rate {:.4}%; removals ≥ 6 d: {}, rate {:.4}% (< 1.5%)",
            jan12_delayed.len(),
            retro,
            100.0 * wave_rate,
            old.len(),
            100.0 * old_rate
        ),
    )
}

fn c8_statistics() -> Outcome {
    // Reference values from an independent implementation.
    let cases: [StatCase; 6] = [
        (
            &[1.0, 2.0, 3.0, 4.0],
            &[5.0, 6.0, 7.0, 8.0],
            -4.381780460041329,
            6.0,
            0.004659214943993928,
            4.5,
            0.033894853524689295,
        ),
        (
            &[12.1, 14.3, 11.8, 15.2, 13.9],
            &[10.2, 9.8, 11.5, 10.9, 12.0, 9.4, 10.1],
            3.9012005173322395,
            6.361633256945465,
            0.007106565578276729,
            5.485714285714286,
            0.019172484755223134,
        ),
        (
            &[3.0, 3.5, 2.9, 4.1, 3.3, 3.8, 2.7, 3.6],
            &[4.9, 5.6, 3.1, 6.8, 4.2, 5.9],
            -3.0604493655411042,
            5.999669069133859,
            0.022213760620294683,
            2.625,
            0.10519250512004134,
        ),
        (
            &[21.0, 34.0, 19.0, 45.0, 28.0, 31.0, 26.0, 39.0, 22.0],
            &[18.0, 20.0, 25.0, 17.0, 23.0, 19.0, 24.0, 21.0, 16.0, 22.0],
            2.927272727272727,
            9.734200025743338,
            0.01552736614967006,
            1.2954012345679005,
            0.2550549527652608,
        ),
        (
            &[0.5, 1.5, 2.5, 3.5, 10.0],
            &[0.2, 0.4, 0.6, 0.8, 1.0, 1.2],
            1.722856724779413,
            4.066480912445148,
            0.15884244586313614,
            2.227499999999999,
            0.13557305375093764,
        ),
        (
            &[100.0, 102.0, 98.0, 101.0, 99.0, 103.0],
            &[100.0, 102.0, 98.0, 101.0, 99.0, 103.0],
            0.0,
            10.0,
            1.0,
            0.0,
            1.0,
        ),
    ];
    let close = |a: f64, b: f64| (a - b).abs() < 5e-5;
    let mut bad = Vec::new();
    for (i, (a, b, t, df, tp, chi, mp)) in cases.iter().enumerate() {
        let w = welch_t_test(a, b).unwrap();
        let m = median_test(a, b).unwrap();
        if !(close(w.statistic, *t) && close(w.df, *df) && close(w.p_value, *tp)) {
            bad.push(format!("case {i} welch {w:?}"));
        }
        if !(close(m.statistic, *chi) && close(m.p_value, *mp)) {
            bad.push(format!("case {i} mood {m:?}"));
        }
    }
    let same: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
    let w = welch_t_test(&same, &same).unwrap().p_value;
    let m = median_test(&same, &same).unwrap().p_value;
    if w < 0.99 || m < 0.99 {
        bad.push(format!("identical samples p = {w}, {m}"));
    }
    check(
        bad.is_empty(),
        format!(
            "{} fixed vector pairs to 4 dp, identical-sample p = {w:.3}/{m:.3}; {bad:?}",
            cases.len()
        ),
    )
}

fn c9_schedules(d: &Analysed) -> Outcome {
    let run = |s: &CrawlSchedule| {
        let mut sink = SummarySink::new(&d.world);
        run_crawls_into(&d.world, s, &mut sink).unwrap();
        (
            sink.mean_slack(&d.world, s.crawl_until).unwrap(),
            sink.missed_removals(&d.world),
        )
    };
    let w = d.world.window;
    let (daily_slack, daily_missed) = run(&d.schedule);
    let (hh_slack, _) = run(&CrawlSchedule::hourly_history(w));
    let (_, hd_missed) = run(&CrawlSchedule::hourly_discovery(w));
    let ratio = hh_slack / daily_slack;
    check(
        ratio <= 0.05 && hd_missed < daily_missed,
        format!(
            "slack daily {:.1} min, hourly history {:.1} min, ratio {ratio:.4} (≤ 0.05); missed daily {daily_missed}, hourly discovery {hd_missed}",
            daily_slack, hh_slack
        ),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c10_determinism_and_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = |sub: &str| RunConfig {
        output_dir: tmp.path().join(sub),
        formats: vec![
            takedown::report::OutputFormat::Csv,
            takedown::report::OutputFormat::Json,
        ],
        scenario: ScenarioConfig {
            seed: 9,
            n_pages: 100,
            ..ScenarioConfig::retroactive_wave()
        },
        ..RunConfig::default()
    };
    let (a, b) = (cfg("a"), cfg("b"));
    cmd_run_all(&a).unwrap();
    cmd_run_all(&b).unwrap();
    let (ta, tb) = (tree(&a.output_dir), tree(&b.output_dir));
    let identical = ta == tb;

    // In memory against CSV export, ingest and re-analysis.
    let d = analyse(a.scenario.clone());
    let pre = "round-trip";
    let (mut obs, mut fol, mut pages, mut ts) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    write_observations_csv(&mut obs, pre, &d.log).unwrap();
    write_followup_csv(&mut fol, pre, &d.log).unwrap();
    write_pages_csv(&mut pages, pre, &d.world.pages).unwrap();
    write_timeseries_csv(&mut ts, pre, &d.series).unwrap();
    let ingested = ingest_snapshots(
        obs.as_slice(),
        fol.as_slice(),
        pages.as_slice(),
        IngestOptions::default(),
    )
    .unwrap();
    let series = read_timeseries_csv(ts.as_slice()).unwrap();
    let removed = infer(&ingested.log, &d.cfg).unwrap();
    let m = compute_metrics(
        &series,
        &removed,
        &d.cfg.periods().unwrap(),
        MetricsOptions::default(),
        d.cfg.meta(),
    )
    .unwrap();
    let same = ingested.rejected.is_empty()
        && ingested.log == d.log
        && ingested.pages == d.world.pages
        && series == d.series
        && removed == d.removed
        && m.results == d.metrics.results
        && m.report == d.metrics.report;
    check(
        identical && same,
        format!(
            "two run-all trees of {} files byte-identical: {identical}; CSV round trip equals in-memory ({} removals, {} results): {same}",
            ta.len(),
            d.removed.len(),
            m.results.len()
        ),
    )
}

fn main() {
    let t0 = Instant::now();
    let world_cfg = ScenarioConfig::default();
    let gen_start = Instant::now();
    generate_world(&world_cfg).unwrap();
    let gen_secs = gen_start.elapsed().as_secs_f64();
    let default = analyse(world_cfg);

    let criteria: Vec<Criterion> = vec![
        (
            "1 engagement speed",
            Box::new(|| c1_engagement_speed(gen_secs, &default)),
        ),
        ("2 time to 80%", Box::new(|| c2_time_to_80(&default))),
        ("3 removal delays", Box::new(|| c3_removal_delays(&default))),
        ("4 inference bounds", Box::new(c4_inference_bounds)),
        (
            "5 homogeneous exactness",
            Box::new(c5_homogeneous_exactness),
        ),
        ("6 validation harness", Box::new(|| c6_validation(&default))),
        ("7 retroactive wave", Box::new(c7_retroactive_wave)),
        ("8 statistics oracle", Box::new(c8_statistics)),
        ("9 schedule comparison", Box::new(|| c9_schedules(&default))),
        (
            "10 determinism and round trip",
            Box::new(c10_determinism_and_round_trip),
        ),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

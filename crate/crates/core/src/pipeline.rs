//! Stage orchestration. Every stage reads its inputs from, and writes its
//! artifacts to, the configured output directory, so any stage can be
//! re-run on its own.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crawl::{
    ingest_snapshots, read_followup_csv, read_observations_csv, read_timeseries_csv, run_crawls,
    write_followup_csv, write_observations_csv, write_timeseries_csv, CrawlSchedule, IngestOptions,
    ObservationLog, TimeSeriesSet,
};
use crate::error::{Error, Result};
use crate::inference::{
    detect_page_deletions, detect_removed, read_removed_csv, write_removed_csv, PeriodKey,
    RemovedSet,
};
use crate::metrics::{
    baseline_rows, compute_metrics, engagement_share_breakdown, post_outcomes,
    removal_rates_by_category, write_prevention_csv, MetricsOptions, MetricsOutput,
    PreventionSummary, ViralRule,
};
use crate::model::{read_pages_csv, write_pages_csv, PageProfile};
use crate::report::{
    compare_schedules, emit_fig1, emit_fig2, emit_fig3, emit_table1, emit_top_impacted,
    rank_by_share, transparency_summary, write_json, write_table, OutputFormat,
    ScheduleComparisonRow,
};
use crate::sim::{generate_world, read_ground_truth, write_ground_truth, ScenarioConfig, World};
use crate::time::{default_step_grid, Period, Periods, StepGrid, TimeWindow, DAY};
use crate::validation::{validate_estimators, ValidationOptions, ValidationReport};
use crate::RunMeta;

pub const PAGES: &str = "pages.csv";
pub const GROUND_TRUTH: &str = "ground_truth.ndjson";
pub const OBSERVATIONS: &str = "observations.csv";
pub const FOLLOWUP: &str = "followup.csv";
pub const TIMESERIES: &str = "timeseries.csv";
pub const INGEST_REJECTS: &str = "ingest_rejects.csv";
pub const REMOVED_SET: &str = "removed_set.csv";
pub const PREVENTION: &str = "prevention_results.csv";
pub const METRICS: &str = "metrics.json";
pub const VALIDATION: &str = "validation_report.json";
pub const TRANSPARENCY: &str = "transparency.json";

/// Crawl schedule as written in a config file: a named preset plus
/// optional overrides, all in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    /// `daily`, `hourly`, `hourly-history`, `hourly-discovery` or `custom`.
    pub preset: String,
    pub discovery_interval_min: Option<u64>,
    pub history_interval_min: Option<u64>,
    pub history_budget: Option<u64>,
    pub followup_at_min: Option<u64>,
    pub start_offset_min: Option<u64>,
    pub crawl_until_min: Option<u64>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::preset("daily")
    }
}

impl ScheduleSpec {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: name.to_string(),
            discovery_interval_min: None,
            history_interval_min: None,
            history_budget: None,
            followup_at_min: None,
            start_offset_min: None,
            crawl_until_min: None,
        }
    }

    pub fn resolve(&self, window: TimeWindow) -> Result<CrawlSchedule> {
        let mut s = if self.preset == "custom" {
            if self.discovery_interval_min.is_none() && self.history_interval_min.is_none() {
                return Err(Error::config(
                    "custom schedule needs discovery_interval_min or history_interval_min",
                ));
            }
            CrawlSchedule::daily(window)
        } else {
            CrawlSchedule::preset(&self.preset, window)?
        };
        if let Some(v) = self.discovery_interval_min {
            s.discovery_interval = v;
        }
        if let Some(v) = self.history_interval_min {
            s.history_interval = v;
        }
        if let Some(v) = self.history_budget {
            s.history_budget = v;
        }
        if let Some(v) = self.followup_at_min {
            s.followup_at = crate::time::SimTime(v);
        }
        if let Some(v) = self.start_offset_min {
            s.start_offset = v;
        }
        if let Some(v) = self.crawl_until_min {
            s.crawl_until = crate::time::SimTime(v);
        }
        s.validate(window)?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub viral_rule: ViralRule,
    pub min_viral_support: usize,
    pub period_key: PeriodKey,
    /// Page-deletion detection: minimum removed posts on the page.
    pub page_deletion_min_posts: usize,
    /// Page-deletion detection: maximum spread of last observations.
    pub page_deletion_max_spread_min: u64,
    pub validation_n: usize,
    /// Defaults to the scenario seed.
    pub validation_seed: Option<u64>,
    pub leave_one_out: bool,
    pub max_reject_rate: f64,
    /// Step-grid offsets in minutes; the standard 37-step grid when absent.
    pub grid: Option<Vec<u64>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            viral_rule: ViralRule::ObservedTotal,
            min_viral_support: 10,
            period_key: PeriodKey::LastObserved,
            page_deletion_min_posts: 20,
            page_deletion_max_spread_min: DAY,
            validation_n: 10_000,
            validation_seed: None,
            leave_one_out: true,
            max_reject_rate: 0.05,
            grid: None,
        }
    }
}

/// Everything a run needs. Loaded from TOML; omitted fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub scenario: ScenarioConfig,
    pub schedule: ScheduleSpec,
    /// Explicit time slices; the standard three-slice split when absent.
    pub periods: Option<Vec<Period>>,
    pub analysis: AnalysisOptions,
    /// Presets compared by `compare-schedules`.
    pub compare: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv],
            scenario: ScenarioConfig::default(),
            schedule: ScheduleSpec::default(),
            periods: None,
            analysis: AnalysisOptions::default(),
            compare: vec![
                "daily".into(),
                "hourly-history".into(),
                "hourly-discovery".into(),
            ],
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta::new(self.seed())
    }

    pub fn schedule(&self) -> Result<CrawlSchedule> {
        self.schedule.resolve(self.scenario.window)
    }

    pub fn grid(&self) -> Result<StepGrid> {
        match &self.analysis.grid {
            Some(offsets) => StepGrid::new(offsets.clone()),
            None => Ok(default_step_grid()),
        }
    }

    /// Configured periods, or the standard split through the last crawl tick.
    pub fn periods(&self) -> Result<Periods> {
        match &self.periods {
            Some(p) => Periods::new(p.clone()),
            None => {
                let schedule = self.schedule()?;
                Periods::standard(self.scenario.window.start, schedule.crawl_until.plus(1))
            }
        }
    }

    pub fn metrics_options(&self) -> MetricsOptions {
        MetricsOptions {
            viral_rule: self.analysis.viral_rule,
            min_viral_support: self.analysis.min_viral_support,
        }
    }

    pub fn validation_options(&self) -> ValidationOptions {
        ValidationOptions {
            n: self.analysis.validation_n,
            seed: self.analysis.validation_seed.unwrap_or(self.seed()),
            leave_one_out: self.analysis.leave_one_out,
        }
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.schedule()?;
        self.periods()?;
        self.grid()?;
        if self.formats.is_empty() {
            return Err(Error::config("formats must name at least one of csv, json"));
        }
        if !(0.0..=1.0).contains(&self.analysis.max_reject_rate) {
            return Err(Error::config("max_reject_rate must lie in [0, 1]"));
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn open(&self, name: &str) -> Result<BufReader<File>> {
        let p = self.path(name);
        File::open(&p)
            .map(BufReader::new)
            .map_err(|e| Error::io(&p, e))
    }

    fn create(&self, name: &str) -> Result<std::io::BufWriter<File>> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        crate::report::create(&self.path(name))
    }
}

fn staged<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(stage))
}

fn finish(mut w: impl Write, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(name, e))
}

/// Generates the world; writes `pages.csv` and `ground_truth.ndjson`.
pub fn cmd_gen(cfg: &RunConfig) -> Result<World> {
    staged("gen", || {
        let world = generate_world(&cfg.scenario)?;
        let meta = cfg.meta();
        let mut out = cfg.create(PAGES)?;
        write_pages_csv(&mut out, &meta.preamble(), &world.pages)?;
        finish(out, PAGES)?;
        let mut out = cfg.create(GROUND_TRUTH)?;
        write_ground_truth(&mut out, &world, cfg.seed())?;
        finish(out, GROUND_TRUTH)?;
        log::info!(
            "generated {} pages, {} posts",
            world.pages.len(),
            world.posts.len()
        );
        Ok(world)
    })
}

pub fn load_pages(cfg: &RunConfig) -> Result<Vec<PageProfile>> {
    read_pages_csv(cfg.open(PAGES)?)
}

pub fn load_world(cfg: &RunConfig) -> Result<World> {
    read_ground_truth(cfg.open(GROUND_TRUTH)?, load_pages(cfg)?)
}

/// Crawls the generated world; writes observations, follow-up and the
/// surviving posts' time series.
pub fn cmd_crawl(cfg: &RunConfig) -> Result<(ObservationLog, TimeSeriesSet)> {
    staged("crawl", || {
        let world = load_world(cfg)?;
        let schedule = cfg.schedule()?;
        let log = run_crawls(&world, &schedule)?;
        let series = TimeSeriesSet::from_world(&world, &log, &cfg.grid()?)?;
        let pre = cfg.meta().preamble();
        let mut out = cfg.create(OBSERVATIONS)?;
        write_observations_csv(&mut out, &pre, &log)?;
        finish(out, OBSERVATIONS)?;
        let mut out = cfg.create(FOLLOWUP)?;
        write_followup_csv(&mut out, &pre, &log)?;
        finish(out, FOLLOWUP)?;
        let mut out = cfg.create(TIMESERIES)?;
        write_timeseries_csv(&mut out, &pre, &series)?;
        finish(out, TIMESERIES)?;
        log::info!(
            "{} observations, {} posts followed up",
            log.observations().len(),
            log.followup().len()
        );
        Ok((log, series))
    })
}

/// External snapshot files for [`cmd_ingest`].
#[derive(Debug, Clone)]
pub struct IngestInputs {
    pub observations: PathBuf,
    pub followup: PathBuf,
    pub pages: PathBuf,
    pub timeseries: Option<PathBuf>,
}

/// Ingests external snapshot exports; writes normalized copies into the
/// output directory plus `ingest_rejects.csv`.
pub fn cmd_ingest(cfg: &RunConfig, inputs: &IngestInputs) -> Result<ObservationLog> {
    staged("ingest", || {
        let open = |p: &Path| {
            File::open(p)
                .map(BufReader::new)
                .map_err(|e| Error::io(p, e))
        };
        let outcome = ingest_snapshots(
            open(&inputs.observations)?,
            open(&inputs.followup)?,
            open(&inputs.pages)?,
            IngestOptions {
                max_reject_rate: cfg.analysis.max_reject_rate,
            },
        )?;
        let pre = cfg.meta().preamble();
        let mut out = cfg.create(PAGES)?;
        write_pages_csv(&mut out, &pre, &outcome.pages)?;
        finish(out, PAGES)?;
        let mut out = cfg.create(OBSERVATIONS)?;
        write_observations_csv(&mut out, &pre, &outcome.log)?;
        finish(out, OBSERVATIONS)?;
        let mut out = cfg.create(FOLLOWUP)?;
        write_followup_csv(&mut out, &pre, &outcome.log)?;
        finish(out, FOLLOWUP)?;
        if let Some(ts) = &inputs.timeseries {
            let series = read_timeseries_csv(open(ts)?)?;
            let mut out = cfg.create(TIMESERIES)?;
            write_timeseries_csv(&mut out, &pre, &series)?;
            finish(out, TIMESERIES)?;
        }
        let mut out = cfg.create(INGEST_REJECTS)?;
        writeln!(out, "# {pre}").map_err(|e| Error::io(INGEST_REJECTS, e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["file", "line", "reason"])?;
        for r in &outcome.rejected {
            w.write_record([r.file, &r.line.to_string(), &r.reason])?;
        }
        w.flush().map_err(|e| Error::io(INGEST_REJECTS, e))?;
        log::info!(
            "ingested {} rows, rejected {}",
            outcome.total_rows,
            outcome.rejected.len()
        );
        Ok(outcome.log)
    })
}

pub fn load_log(cfg: &RunConfig) -> Result<ObservationLog> {
    Ok(ObservationLog::new(
        read_observations_csv(cfg.open(OBSERVATIONS)?)?,
        read_followup_csv(cfg.open(FOLLOWUP)?)?,
    ))
}

/// Removal inference over a log, including page-deletion detection.
pub fn infer(log: &ObservationLog, cfg: &RunConfig) -> Result<RemovedSet> {
    let mut set = detect_removed(log, &cfg.periods()?, cfg.analysis.period_key)?;
    let pages = detect_page_deletions(
        &mut set,
        cfg.analysis.page_deletion_min_posts,
        cfg.analysis.page_deletion_max_spread_min,
    );
    if !pages.is_empty() {
        log::info!("{} pages look deleted", pages.len());
    }
    Ok(set)
}

/// Infers removals from the persisted log; writes `removed_set.csv`.
pub fn cmd_infer(cfg: &RunConfig) -> Result<RemovedSet> {
    staged("infer", || {
        let set = infer(&load_log(cfg)?, cfg)?;
        let mut out = cfg.create(REMOVED_SET)?;
        write_removed_csv(&mut out, &cfg.meta().preamble(), &set)?;
        finish(out, REMOVED_SET)?;
        log::info!("{} removed posts", set.len());
        Ok(set)
    })
}

pub fn load_removed(cfg: &RunConfig) -> Result<RemovedSet> {
    Ok(RemovedSet {
        records: read_removed_csv(cfg.open(REMOVED_SET)?)?,
        ..RemovedSet::default()
    })
}

pub fn load_series(cfg: &RunConfig) -> Result<TimeSeriesSet> {
    read_timeseries_csv(cfg.open(TIMESERIES)?)
}

fn analyse(cfg: &RunConfig, series: &TimeSeriesSet, removed: &RemovedSet) -> Result<MetricsOutput> {
    compute_metrics(
        series,
        removed,
        &cfg.periods()?,
        cfg.metrics_options(),
        cfg.meta(),
    )
}

/// Prevented engagement per removed post; writes `prevention_results.csv`
/// and `metrics.json`.
pub fn cmd_metrics(cfg: &RunConfig) -> Result<MetricsOutput> {
    staged("metrics", || {
        let out = analyse(cfg, &load_series(cfg)?, &load_removed(cfg)?)?;
        let mut w = cfg.create(PREVENTION)?;
        write_prevention_csv(&mut w, &cfg.meta().preamble(), &out.results)?;
        finish(w, PREVENTION)?;
        write_json(&cfg.path(METRICS), &out.report)?;
        Ok(out)
    })
}

/// Simulated-removal validation; writes `validation_report.json`. A run
/// without removals has no cut-time distribution and is reported as skipped.
pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationReport> {
    staged("validate", || {
        let series = load_series(cfg)?;
        let removed = load_removed(cfg)?;
        let options = cfg.validation_options();
        let report = if removed.is_empty() {
            log::warn!("no removals; validation skipped");
            ValidationReport::skipped(
                cfg.meta(),
                options,
                "no removed posts to draw cut times from",
            )
        } else {
            let m = analyse(cfg, &series, &removed)?;
            let rows = baseline_rows(&series, &cfg.periods()?);
            let lifetimes: Vec<u64> = removed.records.iter().map(|r| r.lifetime_lb).collect();
            validate_estimators(&rows, &m.index, &lifetimes, &options, cfg.meta())?
        };
        fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
        write_json(&cfg.path(VALIDATION), &report)?;
        Ok(report)
    })
}

/// Tables, figure data, publisher rankings and the transparency summary.
pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    staged("report", || {
        let pages = load_pages(cfg)?;
        let log = load_log(cfg)?;
        let series = load_series(cfg)?;
        let removed = load_removed(cfg)?;
        let periods = cfg.periods()?;
        let m = analyse(cfg, &series, &removed)?;
        let outcomes = post_outcomes(&log, &removed);
        let meta = cfg.meta();
        let dir = cfg.output_dir.as_path();
        let f = &cfg.formats;

        write_table(dir, "table1", &meta, &emit_table1(&outcomes, &removed), f)?;
        write_table(
            dir,
            "table2",
            &meta,
            &removal_rates_by_category(&outcomes, &pages),
            f,
        )?;
        write_table(dir, "fig1", &meta, &emit_fig1(&removed), f)?;
        let base = baseline_rows(&series, &periods);
        write_table(
            dir,
            "fig2",
            &meta,
            &emit_fig2(&base, &series.grid, m.threshold.threshold),
            f,
        )?;
        let shares = engagement_share_breakdown(&outcomes, &pages, &removed, &periods);
        write_table(dir, "fig3", &meta, &emit_fig3(&shares), f)?;
        let top = emit_top_impacted(&pages, &outcomes);
        write_table(dir, "top_impacted", &meta, &top, f)?;
        write_table(dir, "top_impacted_by_share", &meta, &rank_by_share(top), f)?;
        let summary =
            transparency_summary(meta, &outcomes, &removed, PreventionSummary::of(&m.results));
        write_json(&cfg.path(TRANSPARENCY), &summary)?;
        Ok(())
    })
}

/// Runs each named schedule against the generated world; writes
/// `schedule_comparison.{csv,json}`.
pub fn cmd_compare_schedules(
    cfg: &RunConfig,
    names: &[String],
) -> Result<Vec<ScheduleComparisonRow>> {
    staged("compare-schedules", || {
        let world = load_world(cfg)?;
        let schedules = names
            .iter()
            .map(|n| Ok((n.clone(), ScheduleSpec::preset(n).resolve(world.window)?)))
            .collect::<Result<Vec<_>>>()?;
        let rows = compare_schedules(&world, &schedules)?;
        write_table(
            &cfg.output_dir,
            "schedule_comparison",
            &cfg.meta(),
            &rows,
            &cfg.formats,
        )?;
        Ok(rows)
    })
}

/// gen → crawl → infer → metrics → validate → report.
pub fn cmd_run_all(cfg: &RunConfig) -> Result<()> {
    staged("config", || cfg.validate())?;
    cmd_gen(cfg)?;
    cmd_crawl(cfg)?;
    cmd_infer(cfg)?;
    cmd_metrics(cfg)?;
    cmd_validate(cfg)?;
    cmd_report(cfg)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use takedown::pipeline::{self, IngestInputs, RunConfig, ScheduleSpec};
use takedown::report::OutputFormat;
use takedown::Result;

#[derive(Parser)]
#[command(
    name = "takedown",
    version,
    about = "Removal-efficacy simulator and measurement pipeline"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format for tables and figure data.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulePreset {
    Daily,
    Hourly,
    HourlyHistory,
    HourlyDiscovery,
    Custom,
}

#[derive(Subcommand)]
enum Command {
    /// Generate pages and posts with ground-truth removals.
    Gen,
    /// Crawl the generated world.
    Crawl {
        #[arg(long, value_enum)]
        schedule: Option<SchedulePreset>,
        #[arg(long)]
        discovery_interval_min: Option<u64>,
        #[arg(long)]
        history_interval_min: Option<u64>,
        #[arg(long)]
        history_budget: Option<u64>,
        #[arg(long)]
        followup_at_min: Option<u64>,
    },
    /// Load external snapshot exports.
    Ingest {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        followup: PathBuf,
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        timeseries: Option<PathBuf>,
    },
    /// Infer removed posts from crawl observations.
    Infer,
    /// Estimate prevented engagement.
    Metrics,
    /// Validate estimators with simulated removals.
    Validate,
    /// Write tables and figure data.
    Report,
    /// gen, crawl, infer, metrics, validate and report in sequence.
    RunAll,
    /// Compare crawl schedules on the generated world.
    CompareSchedules {
        /// Presets to compare; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        schedules: Vec<String>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.formats = vec![match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }];
    }
    if let Command::Crawl {
        schedule,
        discovery_interval_min,
        history_interval_min,
        history_budget,
        followup_at_min,
    } = &cli.command
    {
        let spec = &mut cfg.schedule;
        if let Some(s) = schedule {
            *spec = ScheduleSpec::preset(match s {
                SchedulePreset::Daily => "daily",
                SchedulePreset::Hourly => "hourly",
                SchedulePreset::HourlyHistory => "hourly-history",
                SchedulePreset::HourlyDiscovery => "hourly-discovery",
                SchedulePreset::Custom => "custom",
            });
        }
        spec.discovery_interval_min = discovery_interval_min.or(spec.discovery_interval_min);
        spec.history_interval_min = history_interval_min.or(spec.history_interval_min);
        spec.history_budget = history_budget.or(spec.history_budget);
        spec.followup_at_min = followup_at_min.or(spec.followup_at_min);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli).map_err(|e| e.in_stage("config"))?;
    match cli.command {
        Command::Gen => pipeline::cmd_gen(&cfg).map(drop),
        Command::Crawl { .. } => pipeline::cmd_crawl(&cfg).map(drop),
        Command::Ingest {
            observations,
            followup,
            pages,
            timeseries,
        } => pipeline::cmd_ingest(
            &cfg,
            &IngestInputs {
                observations,
                followup,
                pages,
                timeseries,
            },
        )
        .map(drop),
        Command::Infer => pipeline::cmd_infer(&cfg).map(drop),
        Command::Metrics => pipeline::cmd_metrics(&cfg).map(drop),
        Command::Validate => pipeline::cmd_validate(&cfg).map(drop),
        Command::Report => pipeline::cmd_report(&cfg),
        Command::RunAll => pipeline::cmd_run_all(&cfg),
        Command::CompareSchedules { schedules } => {
            let names = if schedules.is_empty() {
                cfg.compare.clone()
            } else {
                schedules
            };
            let rows = pipeline::cmd_compare_schedules(&cfg, &names)?;
            for r in rows {
                println!(
                    "{:<18} missed={:<6} slack_min={:<10} visits={}",
                    r.schedule,
                    r.missed_removals,
                    r.mean_slack_min.map_or("-".into(), |s| format!("{s:.1}")),
                    r.crawl_visits
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

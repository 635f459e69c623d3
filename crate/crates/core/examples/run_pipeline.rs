//! Drive every stage from a TOML config, the way the CLI does, and list
//! the artifacts it leaves behind.

use takedown::pipeline::{cmd_run_all, RunConfig};

const CONFIG: &str = r#"
formats = ["csv", "json"]

[scenario]
seed = 7
n_pages = 150
window = { start = 0, end = 20160 }

[schedule]
preset = "daily"

[analysis]
validation_n = 2000
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::from_toml_str(CONFIG)?;
    cfg.output_dir = std::env::temp_dir().join("takedown-pipeline-example");
    cmd_run_all(&cfg)?;

    let mut names: Vec<String> = std::fs::read_dir(&cfg.output_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    println!("wrote to {}:", cfg.output_dir.display());
    for n in names {
        println!("  {n}");
    }
    Ok(())
}

//! Command-line driver: run one experiment, sweep a parameter, or
//! aggregate run reports into a table.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use helmsource::harness::{run_experiment, sweep_experiment, write_report, ExperimentConfig};

#[derive(Parser)]
#[command(name = "helmsource", version, about = "Helmholtz source reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment from a JSON config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Prefix for the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dot path of the parameter, e.g. `data.noise_delta`.
        #[arg(long)]
        param: String,
        /// JSON-encoded values, e.g. `--values 0 0.01 0.05`.
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate `report.json` files under a directory into a CSV table.
    Report {
        dir: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let report = run_experiment(&cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let parsed: Vec<serde_json::Value> = values
                .iter()
                .map(|v| {
                    serde_json::from_str(v).or_else(|_| {
                        Ok::<_, serde_json::Error>(serde_json::Value::String(v.clone()))
                    })
                })
                .collect::<std::result::Result<_, _>>()?;
            if parsed.is_empty() {
                bail!("no sweep values given");
            }
            let reports = sweep_experiment(&text, &param, &parsed, out.as_deref())?;
            for report in &reports {
                println!(
                    "{} {} -> E_l2 {}",
                    report.name,
                    report.output_dir,
                    report
                        .e_l2
                        .map(|v| format!("{:.3}%", 100.0 * v))
                        .unwrap_or_else(|| "n/a".into())
                );
            }
        }
        Command::Report { dir, out } => {
            let table = write_report(&dir)?;
            match out {
                Some(path) => fs::write(path, table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

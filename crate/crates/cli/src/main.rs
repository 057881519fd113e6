//! `panel-assembly`: run single trials, Monte-Carlo batches and parameter
//! sweeps from a scenario file, and export run logs to CSV.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 task failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use panel_assembly::config::ScenarioConfig;
use panel_assembly::error::Error;
use panel_assembly::pipeline::{run_batch, run_trial};
use panel_assembly::runlog::{available_channels, export_csv, read_runlog, write_runlog};

#[derive(Parser)]
#[command(name = "panel-assembly", version, about = "Dual-arm panel assembly simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario file. The built-in nominal scenario is used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set pipeline.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write runlog.jsonl, outcome.json, config.toml and timing.json.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run randomized trials and write summary.json and outcomes.jsonl.
    Batch {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, short = 'n')]
        trials: usize,
        /// Base seed; trial i uses seed + i. Defaults to pipeline.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep one key over `v1,v2,...` or `start:stop:count`.
        #[arg(long, value_name = "KEY=VALUES")]
        sweep: Option<String>,
    },
    /// Write one `t,value` CSV per channel of a run log.
    Export {
        runlog: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Comma-separated channels such as `yielding.pose.y,driving.wrench_S.fy`.
        #[arg(long, value_delimiter = ',', required_unless_present = "list")]
        channels: Vec<String>,
        #[arg(long, short, required_unless_present = "list")]
        out: Option<PathBuf>,
        /// Print the available channels and exit.
        #[arg(long)]
        list: bool,
    },
    /// Check a scenario file and print the resolved configuration.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

/// Errors that map to exit code 1.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Usage(e.into()))
}

fn core_err(e: Error) -> anyhow::Error {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Io { .. } | Error::Json(_) => usage(e),
        other => other.into(),
    }
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<ScenarioConfig> {
    match &args.config {
        Some(path) => ScenarioConfig::load(path, &args.overrides).map_err(core_err),
        None => ScenarioConfig::from_toml_with_overrides(&ScenarioConfig::default().to_toml_string(), &args.overrides).map_err(core_err),
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(usage)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(usage)
}

fn cmd_run(cfg: &ScenarioConfig, out: &Path) -> anyhow::Result<bool> {
    create_dir(out)?;
    write(&out.join("config.toml"), &cfg.to_toml_string())?;
    let run = run_trial(cfg).map_err(core_err)?;
    write_runlog(&out.join("runlog.jsonl"), &run.log).map_err(core_err)?;
    write(&out.join("outcome.json"), &serde_json::to_string_pretty(&run.outcome)?)?;
    write(&out.join("timing.json"), &serde_json::to_string_pretty(&run.timing)?)?;
    match run.outcome.failure {
        None => println!("success: inserted to {:.4} m", run.outcome.final_insertion_depth_m),
        Some(m) => println!("failure: {}", serde_json::to_value(m)?.as_str().unwrap_or_default()),
    }
    Ok(run.outcome.success)
}

fn batch_into(cfg: &ScenarioConfig, trials: usize, seed: u64, out: &Path) -> anyhow::Result<serde_json::Value> {
    create_dir(out)?;
    write(&out.join("config.toml"), &cfg.to_toml_string())?;
    let result = run_batch(cfg, trials, seed).map_err(core_err)?;
    let mut lines = String::new();
    for o in &result.outcomes {
        lines.push_str(&serde_json::to_string(o)?);
        lines.push('\n');
    }
    write(&out.join("outcomes.jsonl"), &lines)?;
    let summary = serde_json::to_value(&result.summary)?;
    write(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{}: {}/{} succeeded ({:.3})",
        out.display(),
        result.summary.successes,
        result.summary.trials,
        result.summary.success_rate
    );
    Ok(summary)
}

/// Splits `key=v1,v2` or `key=start:stop:count` into the key and its values.
fn parse_sweep(arg: &str) -> anyhow::Result<(String, Vec<String>)> {
    let Some((key, values)) = arg.split_once('=') else {
        bail!("sweep must look like key=v1,v2 or key=start:stop:count");
    };
    let key = key.trim().to_string();
    let parts: Vec<&str> = values.split(':').collect();
    let values: Vec<String> = if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().context("sweep start")?;
        let stop: f64 = parts[1].trim().parse().context("sweep stop")?;
        let count: usize = parts[2].trim().parse().context("sweep count")?;
        if count == 0 {
            bail!("sweep count must be at least 1");
        }
        (0..count)
            .map(|i| if count == 1 { start } else { start + (stop - start) * i as f64 / (count - 1) as f64 })
            .map(|v| format!("{v:?}"))
            .collect()
    } else {
        values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
    };
    if key.is_empty() || values.is_empty() {
        bail!("sweep needs a key and at least one value");
    }
    Ok((key, values))
}

fn cmd_batch(args: &ConfigArgs, out: &Path, trials: usize, seed: Option<u64>, sweep: Option<&str>) -> anyhow::Result<()> {
    if trials == 0 {
        return Err(usage(anyhow::anyhow!("--trials must be at least 1")));
    }
    let base = load_config(args)?;
    let seed = seed.unwrap_or(base.pipeline.seed);
    let Some(sweep) = sweep else {
        batch_into(&base, trials, seed, out)?;
        return Ok(());
    };
    let (key, values) = parse_sweep(sweep).map_err(usage)?;
    // validate every point before running any of them
    let mut configs = Vec::new();
    for v in &values {
        let mut overrides = args.overrides.clone();
        overrides.push(format!("{key}={v}"));
        configs.push(load_config(&ConfigArgs { config: args.config.clone(), overrides })?);
    }
    let mut points = Vec::new();
    for (i, (v, cfg)) in values.iter().zip(&configs).enumerate() {
        let summary = batch_into(cfg, trials, seed, &out.join(format!("point_{i:03}")))?;
        let value = v.parse::<f64>().map(serde_json::Value::from).unwrap_or_else(|_| v.clone().into());
        points.push(serde_json::json!({ "value": value, "summary": summary }));
    }
    let doc = serde_json::json!({ "key": key, "trials": trials, "seed": seed, "points": points });
    write(&out.join("sweep.json"), &serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn cmd_export(runlog: &Path, channels: &[String], out: Option<&Path>, list: bool) -> anyhow::Result<()> {
    let records = read_runlog(runlog).map_err(core_err)?;
    if list {
        for c in available_channels(&records)? {
            println!("{c}");
        }
        return Ok(());
    }
    let out = out.expect("required by clap");
    for path in export_csv(&records, channels, out).map_err(core_err)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, out } => cmd_run(&load_config(&config)?, &out),
        Command::Batch { config, out, trials, seed, sweep } => cmd_batch(&config, &out, trials, seed, sweep.as_deref()).map(|_| true),
        Command::Export { runlog, format: Format::Csv, channels, out, list } => cmd_export(&runlog, &channels, out.as_deref(), list).map(|_| true),
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            print!("{}", cfg.to_toml_string());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

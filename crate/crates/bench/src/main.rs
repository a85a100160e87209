use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixest_bench::config::{ExperimentConfig, Format};
use mixest_bench::error::{BenchError, BenchResult};
use mixest_bench::output::{check_writable, emit_outputs};
use mixest_bench::record::{raw, ExperimentRecord};
use mixest_bench::run::{run_experiment, RunOptions};
use mixest_bench::verify::{theorem_config, verify_theorems};

#[derive(Parser)]
#[command(name = "mixest", version, about = "Streaming mixture-weight estimation experiments")]
struct Cli {
    /// Maximum number of worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the strongly convex last-iterate bounds on a categorical config.
    VerifyTheorems {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a config parameter.
    Sweep {
        config: PathBuf,
        /// Dotted config path, e.g. `n` or `dictionary.epsilon`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; each is read as JSON, else as a string.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render SVG plots from a saved JSON record.
    Plot {
        record: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let options = RunOptions { jobs: cli.jobs };
    match dispatch(cli.command, &options) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mixest: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path, out: Option<PathBuf>) -> BenchResult<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Ok(seed) = std::env::var("MIXEST_SEED") {
        config.seed = seed
            .trim()
            .parse()
            .map_err(|_| BenchError::Config(format!("MIXEST_SEED must be an unsigned integer, got {seed:?}")))?;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    config.validate()?;
    Ok(config)
}

fn prepare_output(config: &ExperimentConfig) -> BenchResult<()> {
    if config.formats.is_empty() {
        return Ok(());
    }
    check_writable(&config.output_dir)
}

fn dispatch(command: Command, options: &RunOptions) -> BenchResult<ExitCode> {
    match command {
        Command::Run { config, out } => {
            let config = load(&config, out)?;
            prepare_output(&config)?;
            let record = run_experiment(&config, options)?;
            finish(&record, &config.formats, &config.output_dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTheorems { config, out } => {
            let config = load(&config, out)?;
            theorem_config(&config)?;
            prepare_output(&config)?;
            let (record, report) = verify_theorems(&config, options)?;
            finish(&record, &config.formats, &config.output_dir)?;
            for check in &report.checks {
                println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { config, param, values, out } => {
            let base = load(&config, out)?;
            let variants = parse_values(&values)
                .into_iter()
                .map(|(label, value)| {
                    let mut c = base.with_override(&param, value)?;
                    c.output_dir = base.output_dir.join(format!("{param}={label}"));
                    c.name = format!("{}_{param}={label}", base.name);
                    c.validate()?;
                    Ok(c)
                })
                .collect::<BenchResult<Vec<_>>>()?;
            for c in &variants {
                prepare_output(c)?;
            }
            for c in &variants {
                println!("== {}", c.name);
                let record = run_experiment(c, options)?;
                finish(&record, &c.formats, &c.output_dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { record, out } => {
            let text = std::fs::read_to_string(&record)?;
            let parsed: ExperimentRecord = serde_json::from_str(&text)
                .map_err(|e| BenchError::Config(format!("{} is not an experiment record: {e}", record.display())))?;
            let dir = out.unwrap_or_else(|| record.parent().map(Path::to_path_buf).unwrap_or_default());
            check_writable(&dir)?;
            for path in emit_outputs(&parsed, &[Format::Svg], &dir)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_values(list: &str) -> Vec<(String, serde_json::Value)> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let value = serde_json::from_str(s).unwrap_or_else(|_| serde_json::Value::String(s.to_string()));
            (s.to_string(), value)
        })
        .collect()
}

fn finish(record: &ExperimentRecord, formats: &[Format], dir: &Path) -> BenchResult<()> {
    for s in &record.series {
        if let (Some(c), Some(m)) = (s.checkpoints.last(), raw(&s.mean).last()) {
            println!("{:<16} {:<22} N={c:<8} mean={m:.6}", s.estimator, s.metric.label());
        }
    }
    for path in emit_outputs(record, formats, dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

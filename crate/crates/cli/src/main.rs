mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{cmd_analyze, cmd_deal, cmd_montecarlo, cmd_run, io_err, CliError, RunInput};
use config::{ConfigError, Experiment, ExperimentConfig};

/// Rational secret sharing simulator.
#[derive(Debug, Parser)]
#[command(name = "rsslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deal shares to `--out`, one binary file per player plus a truth file.
    Deal(Common),
    /// Run one reconstruction and report outputs, halts and utilities.
    Run {
        #[command(flatten)]
        common: Common,
        /// Directory holding share files from `deal` (default: deal from the config).
        #[arg(long)]
        shares: Option<PathBuf>,
    },
    /// Print c_i, c0, beta0, the true-game bound and the admissibility verdicts.
    Analyze(Common),
    /// Run trial campaigns and report aggregate estimates.
    Montecarlo(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Ndjson,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// fifo, random or script:PATH
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl Common {
    fn experiment(&self) -> Result<Option<Experiment>, CliError> {
        match &self.config {
            Some(path) => Ok(Some(ExperimentConfig::load(path)?.resolve(self.seed)?)),
            None => Ok(None),
        }
    }

    fn require_experiment(&self) -> Result<Experiment, CliError> {
        self.experiment()?.ok_or_else(|| ConfigError::Invalid("--config is required".into()).into())
    }
}

fn render<T: Serialize>(report: &T, format: Format) -> Result<String, CliError> {
    match format {
        Format::Text => toml::to_string(report).map_err(|e| CliError::Runtime(e.to_string())),
        Format::Ndjson => serde_json::to_string(report).map(|s| s + "\n").map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn report_file(format: Format) -> &'static str {
    match format {
        Format::Text => "report.toml",
        Format::Ndjson => "report.ndjson",
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(format!("writing {}", path.display())))
}

fn emit<T: Serialize>(report: &T, common: &Common) -> Result<(), CliError> {
    let text = render(report, common.format)?;
    if let Some(dir) = &common.out {
        write_out(dir, report_file(common.format), &text)?;
    }
    std::io::stdout().write_all(text.as_bytes()).map_err(io_err("writing stdout"))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Deal(common) => {
            let exp = common.require_experiment()?;
            let out = common.out.clone().ok_or_else(|| ConfigError::Invalid("deal needs --out DIR".into()))?;
            let report = cmd_deal(&exp, &out)?;
            let text = render(&report, common.format)?;
            std::io::stdout().write_all(text.as_bytes()).map_err(io_err("writing stdout"))?;
            Ok(0)
        }
        Command::Run { common, shares } => {
            let exp = common.experiment()?;
            let (report, transcript) = cmd_run(RunInput {
                exp: exp.as_ref(),
                shares_dir: shares.as_deref(),
                schedule: common.schedule.as_deref(),
                seed: common.seed,
            })?;
            let ndjson = transcript.to_ndjson();
            if let Some(dir) = &common.out {
                write_out(dir, "transcript.ndjson", &ndjson)?;
            }
            let text = render(&report, common.format)?;
            if let Some(dir) = &common.out {
                write_out(dir, report_file(common.format), &text)?;
            }
            let mut stdout = std::io::stdout();
            if common.format == Format::Ndjson && common.out.is_none() {
                stdout.write_all(ndjson.as_bytes()).map_err(io_err("writing stdout"))?;
            }
            stdout.write_all(text.as_bytes()).map_err(io_err("writing stdout"))?;
            Ok(if report.honest_success { 0 } else { 1 })
        }
        Command::Analyze(common) => {
            let exp = common.require_experiment()?;
            emit(&cmd_analyze(&exp)?, &common)?;
            Ok(0)
        }
        Command::Montecarlo(common) => {
            let exp = common.require_experiment()?;
            let trials = common.trials.unwrap_or(exp.trials);
            if trials == 0 {
                return Err(ConfigError::Invalid("trials must be positive".into()).into());
            }
            emit(&cmd_montecarlo(&exp, trials, common.schedule.as_deref())?, &common)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use climate_vre::pipeline::{cmd_compare, cmd_run, cmd_synth, cmd_validate, RunConfig, SynthConfig};

/// Wind/solar/demand time series and key metrics of highly renewable
/// electricity systems under climate scenarios.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every input file and parameter of a run config.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic input bundle and its run.toml.
    Synth {
        /// Optional synth config (TOML); defaults to 30 countries, 20 years, three scenarios.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full pipeline and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare completed runs (one per climate model).
    Compare {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
    },
}

const EXIT_FINDINGS: u8 = 1;
const EXIT_FAILURE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match RunConfig::load(&config) {
            Ok(cfg) => {
                let report = cmd_validate(&cfg);
                for f in &report.findings {
                    println!("{f}");
                }
                if report.is_clean() {
                    println!("0 findings");
                    ExitCode::SUCCESS
                } else {
                    println!("{} findings", report.findings.len());
                    ExitCode::from(EXIT_FINDINGS)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        },
        Command::Synth { config, out, seed } => {
            let loaded = match config {
                Some(p) => SynthConfig::load(p),
                None => Ok(SynthConfig::default()),
            };
            let result = loaded.and_then(|mut c| {
                if let Some(s) = seed {
                    c.seed = s;
                }
                cmd_synth(&c, &out)
            });
            match result {
                Ok(_) => {
                    println!("wrote {}", out.join("run.toml").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
        Command::Run { config, out } => {
            let result = RunConfig::load(&config).and_then(|cfg| {
                let out = out.unwrap_or_else(|| cfg.output_dir.clone());
                cmd_run(&cfg, &out).map(|r| (r, out))
            });
            match result {
                Ok((r, out)) => {
                    let total: f64 = r.timings.iter().map(|(_, s)| s).sum();
                    println!("wrote reports to {} in {total:.1} s", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
        Command::Compare { out, runs } => match cmd_compare(&runs, &out) {
            Ok(rows) => {
                println!("wrote {rows} rows to {}", out.join(climate_vre::pipeline::COMPARISON_FILE).display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        },
    }
}

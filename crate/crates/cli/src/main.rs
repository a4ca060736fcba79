use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use climalens::pipeline::{self, FetchMode, Overrides};
use climalens::{MonthRange, RunConfig, SeFlavor};

#[derive(Parser)]
#[command(name = "climalens", version, about = "Television climate coverage and clean energy firm risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sample window as YYYY-MM:YYYY-MM
    #[arg(long, global = true)]
    window: Option<MonthRange>,
    /// Abort on the first malformed input record
    #[arg(long, global = true)]
    strict: bool,
    /// Standard errors for the panel models
    #[arg(long, global = true, value_parser = ["cluster", "hc1"])]
    se: Option<String>,
    /// Minimum trading days for a firm-month risk estimate
    #[arg(long, global = true)]
    min_days: Option<usize>,
    /// Serve fetches from recorded fixtures
    #[arg(long, global = true, conflicts_with = "live")]
    replay: bool,
    /// Fetch from the live archive
    #[arg(long, global = true)]
    live: bool,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve snippets for every keyword and station
    Fetch,
    /// Parse, filter and aggregate the corpus by month
    Ingest,
    /// Monthly climate indices and their summary statistics
    BuildIndices,
    /// Firm-month three-factor risk estimates
    EstimateRisk,
    /// Fixed-effects model batteries
    Regress,
    /// All stages plus a manifest of hashes
    Report,
    /// Run the pipeline on seeded synthetic data with planted effects
    Selftest,
}

fn config(common: &Common) -> Result<RunConfig, climalens::Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let mut cfg = RunConfig::default();
            cfg.apply_env();
            cfg
        }
    };
    let mode = match (common.replay, common.live) {
        (true, _) => Some(FetchMode::Replay),
        (_, true) => Some(FetchMode::Live),
        _ => None,
    };
    cfg.apply(&Overrides {
        window: common.window,
        strict: common.strict,
        se: common.se.as_deref().map(|s| s.parse::<SeFlavor>().expect("validated by clap")),
        min_days: common.min_days,
        mode,
        out_dir: common.out.clone(),
        seed: common.seed,
    });
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, climalens::Error> {
    let cfg = config(&cli.common)?;
    match cli.command {
        Command::Fetch => {
            let s = pipeline::cmd_fetch(&cfg)?;
            println!("fetched {} queries, {} records, {} record errors", s.queries, s.records, s.record_errors);
        }
        Command::Ingest => {
            let s = pipeline::cmd_ingest(&cfg)?;
            println!(
                "parsed {} snippets from {} files: {} record errors, {} duplicates, {} without keyword, {} outside window, {} kept over {} months",
                s.parsed, s.files, s.record_errors, s.duplicates_removed, s.without_keyword, s.outside_window, s.kept, s.months
            );
            if s.record_errors > 0 {
                eprintln!("see {}", cfg.out_dir.join("ingest_errors.csv").display());
            }
        }
        Command::BuildIndices => {
            let s = pipeline::cmd_build_indices(&cfg)?;
            println!("{} months, {} undefined", s.months, s.undefined_months);
        }
        Command::EstimateRisk => {
            let s = pipeline::cmd_estimate_risk(&cfg)?;
            println!("{} firm-months: {} estimated, {} insufficient", s.firm_months, s.ok, s.insufficient);
        }
        Command::Regress => {
            let s = pipeline::cmd_regress(&cfg)?;
            println!("{} models over {} batteries, {} failed", s.models, s.batteries.len(), s.failed);
            print!("{}", std::fs::read_to_string(cfg.out_dir.join("tables.txt"))?);
        }
        Command::Report => {
            let s = pipeline::cmd_report(&cfg)?;
            println!("report written to {}", s.dir.display());
        }
        Command::Selftest => {
            let s = pipeline::cmd_selftest(&cfg)?;
            for c in &s.checks {
                println!(
                    "{:<5} lnVolCov planted {:+.4} estimate {:+.4} (se {:.4}) 95% CI [{:+.4}, {:+.4}] {}",
                    c.dependent.name(),
                    c.planted,
                    c.coef,
                    c.se,
                    c.ci_low,
                    c.ci_high,
                    if c.covered() { "ok" } else { "MISSED" }
                );
            }
            if s.checks.len() < 2 {
                eprintln!(
                    "first baseline model produced {} of 2 estimates; see {}",
                    s.checks.len(),
                    cfg.out_dir.join("failures.csv").display()
                );
            }
            println!("report written to {}", s.report.dir.display());
            return Ok(s.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

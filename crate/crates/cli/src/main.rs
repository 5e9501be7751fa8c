//! Batch front end: runs the pipeline and writes tables, plots and verdicts
//! under the output directory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rdit::data::{InclusionPolicy, Schema};
use rdit::robustness::VerdictStatus;
use rdit::{Error, ErrorClass, Result, YearMonth};

use commands::Run;
use config::{parse_window, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_INGEST: u8 = 3;
const EXIT_ESTIMATION: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 5;

/// Env var consulted when neither the flags nor the config file name a corpus.
const DATA_ENV: &str = "RDIT_DATA";

#[derive(Parser)]
#[command(name = "rdit", version, about = "Regression discontinuity in time for strike casualty corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Strike-level CSV corpus (falls back to $RDIT_DATA).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// TOML file mapping logical fields to CSV column names.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[arg(long, global = true)]
    cutoff: Option<YearMonth>,
    #[arg(long, global = true)]
    announcement_cutoff: Option<YearMonth>,
    #[arg(long, global = true, value_enum)]
    inclusion: Option<Inclusion>,
    /// Comma-separated bandwidth choices: mserd or manual:N.
    #[arg(long, global = true, value_delimiter = ',')]
    bandwidth: Option<Vec<String>>,
    /// Comma-separated donuts: half-widths or FROM..TO ranges.
    #[arg(long, global = true, value_delimiter = ',')]
    donut: Option<Vec<String>>,
    /// FROM..TO window of candidate cutoffs.
    #[arg(long, global = true)]
    rolling_window: Option<String>,
    /// Comma-separated polynomial orders for the sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long, global = true)]
    max_breaks: Option<usize>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Draw donors from every pre-cutoff strike.
    #[arg(long, global = true)]
    wide_donor_pool: bool,
    #[arg(long, global = true)]
    vsl_low: Option<f64>,
    #[arg(long, global = true)]
    vsl_high: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Descriptive table around both cutoffs.
    Summarize,
    /// Main estimate table and raw-data plots.
    Estimate,
    /// Robustness checks and verdicts.
    Validate,
    /// Counterfactual Monte Carlo and projection plot.
    Simulate,
    /// Every step above.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inclusion {
    StrikeMonthsOnly,
    AllCalendarMonthsZeroFilled,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.schema {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read schema {}: {e}", path.display())))?;
            cfg.schema = toml::from_str::<Schema>(&text)
                .map_err(|e| Error::Config(format!("schema {}: {e}", path.display())))?;
        }
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if cfg.data.is_none() {
            cfg.data = std::env::var_os(DATA_ENV).map(PathBuf::from);
        }
        if let Some(c) = self.cutoff {
            cfg.cutoff = c;
        }
        if let Some(c) = self.announcement_cutoff {
            cfg.announcement_cutoff = c;
        }
        if let Some(i) = self.inclusion {
            cfg.inclusion = match i {
                Inclusion::StrikeMonthsOnly => InclusionPolicy::StrikeMonthsOnly,
                Inclusion::AllCalendarMonthsZeroFilled => InclusionPolicy::AllCalendarMonthsZeroFilled,
            };
        }
        if let Some(b) = &self.bandwidth {
            cfg.bandwidths = b.clone();
        }
        if let Some(d) = &self.donut {
            cfg.donuts = d.clone();
        }
        if let Some(w) = &self.rolling_window {
            cfg.rolling_window = parse_window(w)?;
        }
        if let Some(o) = &self.orders {
            cfg.orders = o.clone();
        }
        if let Some(m) = self.max_breaks {
            cfg.breaks.max_breaks = m;
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.wide_donor_pool |= self.wide_donor_pool;
        if let Some(v) = self.vsl_low {
            cfg.vsl_low = v;
        }
        if let Some(v) = self.vsl_high {
            cfg.vsl_high = v;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

/// Runs the command; `Ok(false)` means some robustness check failed.
fn execute(cli: &Cli) -> Result<bool> {
    let run = Run::load(cli.run_config()?)?;
    let wants = |c: Command| cli.command == c || cli.command == Command::All;
    if wants(Command::Summarize) {
        commands::summarize(&run)?;
    }
    if wants(Command::Estimate) {
        commands::estimate(&run)?;
    }
    let mut checks_ok = true;
    if wants(Command::Validate) {
        let verdicts = commands::validate(&run)?;
        for v in &verdicts {
            println!("{:<24} {:?}", v.check, v.status);
        }
        checks_ok = verdicts.iter().all(|v| v.status != VerdictStatus::Fail);
    }
    if wants(Command::Simulate) {
        commands::simulate(&run)?;
    }
    println!("outputs written to {}", run.config.out.display());
    Ok(checks_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Configuration => EXIT_CONFIG,
                ErrorClass::Ingest => EXIT_INGEST,
                ErrorClass::Estimation => EXIT_ESTIMATION,
            })
        }
    }
}

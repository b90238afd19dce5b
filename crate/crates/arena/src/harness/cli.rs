//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 configuration or argument error, 3 event budget
//! exceeded, 4 verification failure, 1 I/O failure. Errors are reported as a
//! single JSON line on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{ArenaError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::methods::{execute, regret};
use crate::harness::output::{self, emit_csv, emit_trace, read_csv, read_trace, rows_from_ledger, rows_from_record, MetricRow};
use crate::harness::sweep::{parse_axis, run_sweep, GridAxis};
use crate::harness::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "asgd-arena", version, about = "Virtual-clock simulator for asynchronous SGD methods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed list of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// JSONL trace destination (single seed only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Metric CSV destination; defaults to `output.csv` of the config,
        /// then stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross seeds, stepsizes, `R`, `B` and `n`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis specification such as `gamma=5^-5..5^5`, `seed=1..10` or
        /// `R=1,2,4`; repeat for more axes.
        #[arg(long, required = true)]
        grid: Vec<String>,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Allocation-only experiment reporting regret per round.
    Regret {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run named invariant and lemma checks.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-serialize a trace (`.jsonl`) or metric CSV; a `.csv` destination
    /// for a trace writes the trace as CSV.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn is_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn write_rows(rows: &[MetricRow], path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => emit_csv(rows, p),
        None => output::write_csv(rows, out),
    }
}

fn seeds(cfg: &ExperimentConfig, seed: Option<u64>) -> Vec<u64> {
    seed.map_or_else(|| cfg.seed_list(), |s| vec![s])
}

fn cmd_run(config: &Path, seed: Option<u64>, trace: Option<&Path>, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let seeds = seeds(&cfg, seed);
    let trace = trace.map(Path::to_path_buf).or_else(|| cfg.output.trace.clone());
    if trace.is_some() && seeds.len() != 1 {
        return Err(ArenaError::Config("a trace needs exactly one seed".into()));
    }
    let mut rows = Vec::new();
    for &s in &seeds {
        let run = execute(&cfg, s, None, trace.is_some())?;
        for w in &run.record.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(t) = &trace {
            emit_trace(&run.record.trace, t)?;
        }
        rows.extend(rows_from_record(cfg.method.id(), s, &run.record, run.regret.as_deref()));
    }
    let dest = dest.map(Path::to_path_buf).or_else(|| cfg.output.csv.clone());
    write_rows(&rows, dest.as_deref(), out)
}

fn cmd_sweep(config: &Path, grid: &[String], dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let axes: Vec<GridAxis> = grid
        .iter()
        .flat_map(|g| g.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect::<Vec<_>>())
        .map(|g| parse_axis(&g))
        .collect::<Result<_>>()?;
    let dir = dest.map(Path::to_path_buf).or_else(|| cfg.output.dir.clone());
    let summaries = run_sweep(&cfg, &axes, dir.as_deref())?;
    for s in &summaries {
        writeln!(out, "{} reached={} time={} k={}", s.key, s.reached, s.final_time, s.final_k)?;
    }
    Ok(())
}

fn cmd_regret(config: &Path, seed: Option<u64>, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let mut rows = Vec::new();
    for s in seeds(&cfg, seed) {
        let ledger = regret(&cfg, s)?;
        rows.extend(rows_from_ledger(cfg.method.id(), s, &ledger));
    }
    let dest = dest.map(Path::to_path_buf).or_else(|| cfg.output.csv.clone());
    write_rows(&rows, dest.as_deref(), out)
}

fn cmd_verify(suite: &str, trials: Option<usize>, seed: u64, out: &mut dyn Write) -> Result<()> {
    let suite: Suite = suite.parse()?;
    if trials == Some(0) {
        return Err(ArenaError::Config("--trials must be positive".into()));
    }
    let reports = run_suite(suite, trials, seed)?;
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.ok()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ArenaError::Verification(failed.join(",")))
    }
}

fn cmd_export(input: &Path, dest: &Path) -> Result<()> {
    if is_ext(input, "jsonl") {
        let events = read_trace(input)?;
        if is_ext(dest, "csv") {
            let f = std::fs::File::create(dest)?;
            output::write_trace_csv(&events, std::io::BufWriter::new(f))
        } else {
            emit_trace(&events, dest)
        }
    } else if is_ext(input, "csv") {
        emit_csv(&read_csv(input)?, dest)
    } else {
        Err(ArenaError::Config(format!("cannot infer the format of {}", input.display())))
    }
}

/// Runs a parsed command, writing normal output to `out`.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, trace, output } => cmd_run(&config, seed, trace.as_deref(), output.as_deref(), out),
        Command::Sweep { config, grid, output } => cmd_sweep(&config, &grid, output.as_deref(), out),
        Command::Regret { config, seed, output } => cmd_regret(&config, seed, output.as_deref(), out),
        Command::Verify { suite, trials, seed } => cmd_verify(&suite, trials, seed, out),
        Command::Export { input, output } => cmd_export(&input, &output),
    }
}

/// Machine-readable error line.
pub fn error_line(err: &ArenaError) -> String {
    serde_json::json!({ "error": err.kind(), "code": err.exit_code(), "message": err.to_string() }).to_string()
}

/// Parses `args` (including the program name) and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}

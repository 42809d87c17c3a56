//! `chosim` command-line front end.
//!
//! Exit codes: 0 ok, 1 run failure (policy block, aborted sweep row, trace
//! mismatch), 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chosim::artifacts::{self, SUMMARY_FILE};
use chosim::campaign::{self, Axis, CampaignError, SweepSpec, SUCCESS_TABLE_FILE};
use chosim::handover::HoMode;

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "chosim", version, about = "Deterministic handover / conditional-handover simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifact bundle.
    Run {
        /// Scenario file, or `builtin:<name>`.
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the artifact bundle.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the handover mode (traditional or cho).
        #[arg(long)]
        mode: Option<String>,
    },
    /// Run a replication sweep and write a success table.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Swept parameter: speed_kmh or shadowing_sigma_dB.
        #[arg(long, default_value = "speed_kmh")]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![3.0, 30.0, 60.0, 120.0, 200.0])]
        values: Vec<f64>,
        /// Comma-separated modes.
        #[arg(long, value_delimiter = ',', default_values_t = vec!["traditional".to_string(), "cho".to_string()])]
        mode: Vec<String>,
        #[arg(long, default_value_t = 5)]
        replications: u32,
        /// Base seed; replication i uses base + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a candidate bundle against a golden one.
    Verify { golden: PathBuf, candidate: PathBuf },
    /// Print a run summary or a sweep success table.
    Report { dir: PathBuf },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_RUN_FAILURE)
}

fn campaign_exit(e: CampaignError) -> ExitCode {
    if e.is_usage() {
        usage(e)
    } else {
        failure(e)
    }
}

fn parse_mode(s: &str) -> Result<HoMode, String> {
    HoMode::parse(s).ok_or_else(|| format!("unknown mode `{s}` (expected traditional or cho)"))
}

fn cmd_run(scenario: &str, seed: Option<u64>, mode: Option<&str>, out: &Path) -> ExitCode {
    let mut cfg = match campaign::resolve_scenario(scenario) {
        Ok(c) => c,
        Err(e) => return campaign_exit(e),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(m) = mode {
        match parse_mode(m) {
            Ok(m) => cfg.ho.mode = m,
            Err(e) => return usage(e),
        }
    }
    let a = match chosim::run(&cfg) {
        Ok(a) => a,
        Err(chosim::SimError::Config(e)) => return usage(e),
        Err(e) => return failure(e),
    };
    if let Err(e) = artifacts::write_dir(&a, out) {
        return failure(e);
    }
    let s = &a.summary;
    println!(
        "{}: {} attempts, {} successes, {} ping-pongs, {} directives -> {}",
        s.scenario,
        s.attempts,
        s.successes,
        s.ping_pongs,
        s.directives_applied,
        out.display()
    );
    ExitCode::SUCCESS
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    scenario: &str,
    axis: &str,
    values: Vec<f64>,
    modes: &[String],
    replications: u32,
    seed: u64,
    workers: usize,
    out: &Path,
) -> ExitCode {
    let spec = (|| -> Result<SweepSpec, CampaignError> {
        Ok(SweepSpec {
            scenario: campaign::resolve_scenario(scenario)?,
            axis: Axis::parse(axis)?,
            values,
            modes: Vec::new(),
            replications,
            base_seed: seed,
        })
    })();
    let mut spec = match spec {
        Ok(s) => s,
        Err(e) => return campaign_exit(e),
    };
    for m in modes {
        match parse_mode(m) {
            Ok(m) if !spec.modes.contains(&m) => spec.modes.push(m),
            Ok(_) => {}
            Err(e) => return usage(e),
        }
    }
    let outcome = match campaign::run_sweep(&spec, workers, Some(out)) {
        Ok(o) => o,
        Err(e) => return campaign_exit(e),
    };
    print!("{}", outcome.table.to_csv());
    for f in &outcome.failures {
        eprintln!("run aborted ({}={}, {}, seed {}): {}", axis, f.axis_value, f.mode.as_str(), f.seed, f.error);
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILURE)
    }
}

fn cmd_verify(golden: &Path, candidate: &Path) -> ExitCode {
    match artifacts::verify_dirs(golden, candidate) {
        Ok(d) if d.is_empty() => {
            println!("identical");
            ExitCode::SUCCESS
        }
        Ok(diffs) => {
            for d in &diffs {
                println!("{d}");
            }
            println!("{} file(s) differ", diffs.len());
            ExitCode::from(EXIT_RUN_FAILURE)
        }
        // Missing or unreadable bundles are input errors.
        Err(e) => usage(e),
    }
}

fn cmd_report(dir: &Path) -> ExitCode {
    let table = dir.join(SUCCESS_TABLE_FILE);
    let summary = dir.join(SUMMARY_FILE);
    let path = if table.is_file() {
        table
    } else if summary.is_file() {
        summary
    } else {
        return usage(format!("{} holds neither {SUCCESS_TABLE_FILE} nor {SUMMARY_FILE}", dir.display()));
    };
    match fs::read_to_string(&path) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => usage(format!("{}: {e}", path.display())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run {
            scenario,
            seed,
            out,
            mode,
        } => cmd_run(&scenario, seed, mode.as_deref(), &out),
        Command::Sweep {
            scenario,
            axis,
            values,
            mode,
            replications,
            seed,
            workers,
            out,
        } => cmd_sweep(&scenario, &axis, values, &mode, replications, seed, workers, &out),
        Command::Verify { golden, candidate } => cmd_verify(&golden, &candidate),
        Command::Report { dir } => cmd_report(&dir),
    }
}

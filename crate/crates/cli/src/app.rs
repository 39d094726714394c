//! Argument parsing and dispatch for the `qfeedback` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::{cmd_check, cmd_ensemble, cmd_exit_time, cmd_exponent, cmd_simulate, CliError, ExponentSource, Scenario};

#[derive(Parser)]
#[command(name = "qfeedback", version, about = "Feedback stabilization of a qubit under continuous measurement with a mismatched filter")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; `builtin:fig1` and `builtin:fig2` select the bundled ones.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (CSV for simulate/ensemble, JSON otherwise); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory as CSV.
    Simulate,
    /// Ensemble summary CSV plus JSON report.
    Ensemble {
        /// JSON report path; defaults to `--out` with a `.json` extension.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample Lyapunov exponents against the reference rates.
    Exponent {
        /// Fit window `start,end`.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Fit an existing CSV (columns `t` and `mean_V` or `V`) instead of running.
        #[arg(long)]
        from_csv: Option<PathBuf>,
    },
    /// Exit times from the ball around the unstable pair.
    ExitTime {
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Invariant batteries; exits 1 when any property fails.
    Check,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn load(common: &Common) -> Result<Scenario, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut scn = Scenario::load(path)?;
    if let Some(seed) = common.seed {
        scn.seed = seed;
    }
    Ok(scn)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Simulate => {
            let scn = load(&cli.common)?;
            let mut w = sink(out)?;
            cmd_simulate(&scn, &mut w)?;
            w.flush()?;
        }
        Command::Ensemble { json } => {
            let scn = load(&cli.common)?;
            let mut w = sink(out)?;
            let report = cmd_ensemble(&scn, &mut w)?;
            w.flush()?;
            let json = json.clone().or_else(|| out.map(|p| p.with_extension("json")));
            match json {
                Some(p) => write_json(Some(&p), &report)?,
                None => log::info!("no JSON path given; report not written"),
            }
        }
        Command::Exponent { window, from_csv } => {
            let summary = match from_csv {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    let scn = match &cli.common.config {
                        Some(_) => Some(load(&cli.common)?),
                        None => None,
                    };
                    cmd_exponent(ExponentSource::Csv { text: &text, scenario: scn.as_ref() }, *window)?
                }
                None => {
                    let scn = load(&cli.common)?;
                    cmd_exponent(ExponentSource::Ensemble(&scn), *window)?
                }
            };
            write_json(out, &summary)?;
        }
        Command::ExitTime { radius } => {
            let scn = load(&cli.common)?;
            write_json(out, &cmd_exit_time(&scn, *radius)?)?;
        }
        Command::Check => {
            let scn = load(&cli.common)?;
            let report = cmd_check(&scn)?;
            write_json(out, &report)?;
            for p in &report.properties {
                eprintln!("{} {}", if p.passed { "PASS" } else { "FAIL" }, p.name);
            }
            if !report.passed {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = match cli.common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::Config(format!("threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

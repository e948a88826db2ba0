//! `auvnav`: simulate missions, replay sensor logs through the filter and
//! compare estimates with truth.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use auvnav::config::{ConfigError, RunConfig};
use auvnav::records::{self, LogRecord, RecordError, StateRecord};
use auvnav::replay::{replay, ReplayOptions};
use auvnav::report::{self, ReportError, RunReport};
use auvnav::sim::{simulate, Simulation};
use auvnav::NavError;
use clap::{Parser, Subcommand};
use log::{info, warn};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "auvnav", version, about = "Aided inertial navigation for underwater vehicles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mission: sensor log, truth trace and summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sensor log through the filter.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Heading the filter starts from, degrees.
        #[arg(long, allow_negative_numbers = true)]
        initial_heading_deg: Option<f64>,
        /// Truth trace to score the run against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Compare an estimate trace with a truth trace.
    Compare {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    fn records(path: &Path) -> impl FnOnce(RecordError) -> CliError + '_ {
        move |e| match e {
            RecordError::Io { source, .. } => CliError::Io { path: path.to_path_buf(), source },
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<NavError> for CliError {
    fn from(e: NavError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn write_jsonl<'a>(path: &Path, records: impl IntoIterator<Item = &'a LogRecord>) -> Result<()> {
    let mut w = create(path)?;
    records::write_records(&mut w, records).map_err(CliError::io(path))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path)(e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(CliError::io(path))
}

fn read_trace(path: &Path, want_truth: bool) -> Result<Vec<StateRecord>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let records = records::read_records(BufReader::new(file)).map_err(CliError::records(path))?;
    let trace: Vec<StateRecord> = records
        .into_iter()
        .filter_map(|r| match r {
            LogRecord::Truth(s) if want_truth => Some(s),
            LogRecord::Estimate(s) if !want_truth => Some(s),
            _ => None,
        })
        .collect();
    if trace.is_empty() {
        let kind = if want_truth { "truth" } else { "estimate" };
        return Err(CliError::Invalid(format!("{}: no {kind} records", path.display())));
    }
    Ok(trace)
}

/// Keeps the first record of every `1 / rate` interval and the last record.
fn decimate<T>(items: &[T], rate_hz: f64, time: impl Fn(&T) -> f64) -> Vec<&T> {
    if rate_hz <= 0.0 {
        return items.iter().collect();
    }
    let period = 1.0 / rate_hz;
    let mut next = f64::NEG_INFINITY;
    let mut kept = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let t = time(item);
        if t + 1e-9 >= next || i + 1 == items.len() {
            kept.push(item);
            next = t + period;
        }
    }
    kept
}

fn write_simulation(sim: &Simulation, config: &RunConfig, out: &Path) -> Result<()> {
    let sensors: Vec<LogRecord> = sim.events().iter().map(LogRecord::from_event).collect();
    write_jsonl(&out.join("sensors.jsonl"), &sensors)?;
    let truth: Vec<LogRecord> = decimate(&sim.truth, config.output.truth_rate_hz, |r| r.t)
        .into_iter()
        .map(|r| LogRecord::Truth(StateRecord::new(r.t, &r.state)))
        .collect();
    write_jsonl(&out.join("truth.jsonl"), &truth)?;
    write_json(&out.join("summary.json"), &sim.summary)
}

fn cmd_simulate(config_path: &Path, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let sim = simulate(&config.mission, &config.sensors.simulation_noise(), &config.lever_arms())?;
    if sim.imu.is_empty() {
        warn!("mission has zero duration; writing empty streams");
    }
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_simulation(&sim, &config, out)?;
    let s = &sim.summary;
    println!("duration:    {:.2} s", s.duration_s);
    println!("imu samples: {}", s.imu_samples);
    for sensor in auvnav::sensors::Sensor::ALL {
        println!("{:<12} {}", format!("{sensor}:"), s.measurements.get(sensor));
    }
    println!("outliers:    {}", s.outliers_injected);
    println!("path length: {:.1} m", s.path_length_m);
    Ok(())
}

fn cmd_replay(
    log_path: &Path,
    config_path: &Path,
    out: &Path,
    initial_heading_deg: Option<f64>,
    truth_path: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    if let Some(h) = initial_heading_deg {
        if !h.is_finite() {
            return Err(CliError::Invalid(format!("initial heading {h} is not finite")));
        }
    }
    let file = File::open(log_path).map_err(CliError::io(log_path))?;
    let events = records::read_events(BufReader::new(file)).map_err(CliError::records(log_path))?;
    info!("{} events read from {}", events.len(), log_path.display());
    let truth = truth_path.map(|p| read_trace(p, true)).transpose()?;

    let options = ReplayOptions {
        initial_heading: initial_heading_deg.map(f64::to_radians),
        estimate_rate_hz: config.output.estimate_rate_hz,
        ..ReplayOptions::default()
    };
    let output = replay(&events, config.filter, config.sensors.noise, config.lever_arms(), &options)?;
    if output.estimates.is_empty() {
        warn!("the filter never initialized; no GPS fix in the log");
    }

    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let estimates: Vec<LogRecord> = output.estimates.iter().cloned().map(LogRecord::Estimate).collect();
    write_jsonl(&out.join("estimate.jsonl"), &estimates)?;
    let report = match &truth {
        Some(truth) => {
            let (mut report, rows) = RunReport::against_truth(&output.estimates, truth)?;
            report.surfacings = output.surfacings.clone();
            let path = out.join("errors.csv");
            report::write_error_csv(&mut create(&path)?, &rows).map_err(CliError::io(&path))?;
            report
        }
        None => RunReport::from_replay(&output)?,
    };
    write_json(&out.join("report.json"), &report)?;
    println!("{report}");
    Ok(())
}

fn cmd_compare(estimate_path: &Path, truth_path: &Path, out: &Path) -> Result<()> {
    let estimates = read_trace(estimate_path, false)?;
    let truth = read_trace(truth_path, true)?;
    let (report, rows) = RunReport::against_truth(&estimates, &truth)?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let path = out.join("errors.csv");
    report::write_error_csv(&mut create(&path)?, &rows).map_err(CliError::io(&path))?;
    write_json(&out.join("report.json"), &report)?;
    println!("{report}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Replay { log, config, out, initial_heading_deg, truth } => {
            cmd_replay(&log, &config, &out, initial_heading_deg, truth.as_deref())
        }
        Command::Compare { estimate, truth, out } => cmd_compare(&estimate, &truth, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("NAV_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `ecoacc` command-line runner.
//!
//! Exit codes: 0 success, 2 usage, 3 scenario or trace parse error,
//! 4 verification failure, 5 runtime fault, 6 I/O error. Log verbosity is
//! read from `ECOACC_LOG` (`error` .. `trace`, default `info`).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use ecoacc::harness::{run_episode, run_realtime, Episode, RealtimeOptions};
use ecoacc::plot::emit_plots;
use ecoacc::scenario::{parse_scenario, Scenario, CATCHUP_SCN, URBAN_SCN};
use ecoacc::trace::{
    read_timing, read_trace, trace_hash, write_timing, write_trace, TraceError, TIMING_FILE, TRACE_FILE,
};
use ecoacc::verify::{verify, Evidence};

#[derive(Parser)]
#[command(name = "ecoacc", version, about = "Closed-loop eco-ACC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lockstep,
    Realtime,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv and timing.csv.
    Run {
        /// Scenario file, or `catchup` / `urban` for the bundled ones.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "lockstep")]
        mode: Mode,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Simulated seconds per wall-clock second in realtime mode.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Render timeseries.svg and trajectory.svg from a trace.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draws red phases from the signal plans instead of the trace.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Check a trace against the closed-loop invariants.
    Verify {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        trace: PathBuf,
        /// Timing sidecar; defaults to timing.csv beside the trace.
        #[arg(long)]
        timing: Option<PathBuf>,
        /// Seed the trace was produced with, if overridden.
        #[arg(long)]
        seed: Option<u64>,
        /// Re-runs the scenario in lockstep and compares trace hashes.
        #[arg(long)]
        rerun: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl fmt::Display) -> Self {
        Self { code: 3, message: message.to_string() }
    }

    fn verify(message: impl fmt::Display) -> Self {
        Self { code: 4, message: message.to_string() }
    }

    fn runtime(message: impl fmt::Display) -> Self {
        Self { code: 5, message: message.to_string() }
    }

    fn io(message: impl fmt::Display) -> Self {
        Self { code: 6, message: message.to_string() }
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Io { .. } => Failure::io(e),
            TraceError::Csv { .. } => Failure::parse(e),
        }
    }
}

fn load_scenario(name: &str, seed: Option<u64>) -> Result<Scenario, Failure> {
    let path = Path::new(name);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| Failure::io(format!("{name}: {e}")))?
    } else {
        match name {
            "catchup" | "catchup.scn" => CATCHUP_SCN.to_string(),
            "urban" | "urban.scn" => URBAN_SCN.to_string(),
            _ => return Err(Failure::io(format!("{name}: no such file or bundled scenario"))),
        }
    };
    let scenario = parse_scenario(&text).map_err(|e| Failure::parse(format!("{name}: {e}")))?;
    Ok(match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario,
    })
}

fn run(scenario: &str, mode: Mode, seed: Option<u64>, out: &Path, speed: f64) -> Result<(), Failure> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Failure { code: 2, message: format!("--speed must be positive, got {speed}") });
    }
    let sc = load_scenario(scenario, seed)?;
    info!("running {} for {} s ({} steps)", sc.name, sc.duration, sc.steps());
    let started = Instant::now();
    let episode: Episode = match mode {
        Mode::Lockstep => run_episode(&sc),
        Mode::Realtime => run_realtime(&sc, RealtimeOptions { speed }),
    }
    .map_err(Failure::runtime)?;
    info!("finished in {:.2} s wall-clock", started.elapsed().as_secs_f64());
    if episode.deadline_misses > 0 {
        warn!("{} controller steps exceeded dt", episode.deadline_misses);
    }
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    write_trace(&episode.trace, &out.join(TRACE_FILE))?;
    write_timing(&episode.timing, &out.join(TIMING_FILE))?;
    if let Some(last) = episode.trace.last() {
        println!(
            "{} records, traction {:.1} J, braking {:.1} J, deadline misses {}",
            episode.trace.len(),
            last.traction_work,
            last.braking_work,
            episode.deadline_misses
        );
    }
    println!("trace sha256 {}", trace_hash(&episode.trace));
    Ok(())
}

fn plot(trace: &Path, out: &Path, scenario: Option<&str>) -> Result<(), Failure> {
    let records = read_trace(trace)?;
    let sc = scenario.map(|s| load_scenario(s, None)).transpose()?;
    let paths = emit_plots(&records, sc.as_ref().map(|s| &s.corridor), out).map_err(|e| match e {
        ecoacc::plot::PlotError::EmptyTrace => Failure::parse(format!("{}: {e}", trace.display())),
        ecoacc::plot::PlotError::Io { .. } => Failure::io(e),
    })?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn verify_trace(
    scenario: &str,
    trace: &Path,
    timing: Option<&Path>,
    seed: Option<u64>,
    rerun: bool,
) -> Result<(), Failure> {
    let sc = load_scenario(scenario, seed)?;
    let records = read_trace(trace)?;
    let sidecar = match timing {
        Some(p) => Some(read_timing(p)?),
        None => {
            let beside = trace.with_file_name(TIMING_FILE);
            beside.exists().then(|| read_timing(&beside)).transpose()?
        }
    };
    let rerun_hash = if rerun {
        info!("re-running {} in lockstep", sc.name);
        Some(trace_hash(&run_episode(&sc).map_err(Failure::runtime)?.trace))
    } else {
        None
    };
    let report = verify(
        &sc,
        &records,
        Evidence { timing: sidecar.as_deref(), rerun_hash: rerun_hash.as_deref() },
    );
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::verify("verification failed"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECOACC_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, mode, seed, out, speed } => run(scenario, *mode, *seed, out, *speed),
        Command::Plot { trace, out, scenario } => plot(trace, out, scenario.as_deref()),
        Command::Verify { scenario, trace, timing, seed, rerun } => {
            verify_trace(scenario, trace, timing.as_deref(), *seed, *rerun)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

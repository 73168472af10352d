//! Closed-loop traces as CSV.
//!
//! Column order is the field order of [`TraceRecord`]. Floats are written
//! in shortest round-trip form, so a written trace parses back bit-exactly.
//! Absent values (`d_tl` and `signal_index` with no signal ahead, `status`
//! when no QP was solved) are empty cells, and `signal_phase` is `none`.
//!
//! Controller compute times are nondeterministic and live in a separate
//! `timing.csv` (`step,time,controller_seconds`) next to the trace, which
//! keeps the trace itself a pure function of scenario and seed.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mpc::Action;
use crate::qp::SolverStatus;
use crate::signals::Phase;

pub const TRACE_FILE: &str = "trace.csv";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl TraceError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> TraceError + '_ {
        move |source| TraceError::Io { path: path.to_path_buf(), source }
    }

    fn csv(path: &Path) -> impl FnOnce(csv::Error) -> TraceError + '_ {
        move |source| TraceError::Csv { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseCell {
    None,
    Green,
    Yellow,
    Red,
}

impl From<Option<Phase>> for PhaseCell {
    fn from(p: Option<Phase>) -> Self {
        match p {
            None => PhaseCell::None,
            Some(Phase::Green) => PhaseCell::Green,
            Some(Phase::Yellow) => PhaseCell::Yellow,
            Some(Phase::Red) => PhaseCell::Red,
        }
    }
}

/// One plant step. `f_t`/`f_b` are the commands held over
/// `[time, time + dt)`; the work columns include this step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
    pub wheel_force: f64,
    pub f_t: f64,
    pub f_b: f64,
    pub radar_distance: f64,
    pub radar_relative_velocity: f64,
    pub radar_target: bool,
    pub signal_index: Option<usize>,
    pub d_tl: Option<f64>,
    pub signal_phase: PhaseCell,
    pub status: Option<SolverStatus>,
    pub action: Action,
    pub objective: f64,
    pub iterations: u32,
    pub traction_work: f64,
    pub braking_work: f64,
}

pub const TRACE_COLUMNS: [&str; 18] = [
    "time",
    "position",
    "velocity",
    "wheel_force",
    "f_t",
    "f_b",
    "radar_distance",
    "radar_relative_velocity",
    "radar_target",
    "signal_index",
    "d_tl",
    "signal_phase",
    "status",
    "action",
    "objective",
    "iterations",
    "traction_work",
    "braking_work",
];

pub fn write_trace_to<W: Write>(w: W, trace: &[TraceRecord]) -> Result<(), csv::Error> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(TRACE_COLUMNS)?;
    for r in trace {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_trace(trace: &[TraceRecord], path: &Path) -> Result<(), TraceError> {
    let file = File::create(path).map_err(TraceError::io(path))?;
    write_trace_to(BufWriter::new(file), trace).map_err(TraceError::csv(path))
}

pub fn read_trace_from<R: Read>(r: R) -> Result<Vec<TraceRecord>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let file = File::open(path).map_err(TraceError::io(path))?;
    read_trace_from(io::BufReader::new(file)).map_err(TraceError::csv(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub step: usize,
    pub time: f64,
    pub controller_seconds: f64,
}

pub fn write_timing(timing: &[TimingRecord], path: &Path) -> Result<(), TraceError> {
    let file = File::create(path).map_err(TraceError::io(path))?;
    let mut wr = csv::Writer::from_writer(BufWriter::new(file));
    for t in timing {
        wr.serialize(t).map_err(TraceError::csv(path))?;
    }
    wr.flush().map_err(TraceError::io(path))
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRecord>, TraceError> {
    let file = File::open(path).map_err(TraceError::io(path))?;
    csv::Reader::from_reader(io::BufReader::new(file))
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(TraceError::csv(path))
}

/// SHA-256 of the CSV encoding, lowercase hex.
pub fn trace_hash(trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace_to(&mut buf, trace).expect("writing to memory");
    hex(&Sha256::digest(&buf))
}

pub fn file_hash(path: &Path) -> Result<String, TraceError> {
    let bytes = std::fs::read(path).map_err(TraceError::io(path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> TraceRecord {
        TraceRecord {
            time: t,
            position: 1.0 / 3.0,
            velocity: 0.1 + 0.2,
            wheel_force: -0.0,
            f_t: 1e-300,
            f_b: -8000.0,
            radar_distance: 150.0,
            radar_relative_velocity: 0.0,
            radar_target: false,
            signal_index: None,
            d_tl: Some(f64::MIN_POSITIVE),
            signal_phase: PhaseCell::Red,
            status: Some(SolverStatus::Optimal),
            action: Action::Optimal,
            objective: f64::NAN,
            iterations: 12,
            traction_work: 7.0,
            braking_work: 0.0,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), TRACE_COLUMNS.join(","));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let trace = vec![record(0.0), record(0.1)];
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &trace).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 3);
        let back = read_trace_from(&buf[..]).unwrap();
        for (a, b) in trace.iter().zip(&back) {
            assert_eq!(a.position.to_bits(), b.position.to_bits());
            assert_eq!(a.wheel_force.to_bits(), b.wheel_force.to_bits());
            assert_eq!(a.f_t.to_bits(), b.f_t.to_bits());
            assert_eq!(a.d_tl.map(f64::to_bits), b.d_tl.map(f64::to_bits));
            assert!(b.objective.is_nan());
            assert_eq!(a.status, b.status);
            assert_eq!(a.signal_index, b.signal_index);
        }
    }
}

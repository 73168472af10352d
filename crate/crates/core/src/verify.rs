//! Closed-loop checks over a recorded trace.
//!
//! Every check yields an [`Outcome`] and a one-line detail with its margin.
//! Checks that only hold for matched models are skipped when the scenario
//! runs a mismatched plant, and checks whose inputs are absent (no timing
//! sidecar, no rerun) are skipped rather than failed.

use std::fmt;

use crate::scenario::Scenario;
use crate::trace::{trace_hash, PhaseCell, TimingRecord, TraceRecord};

/// How far past a red stop line the ego may be, m.
pub const RED_LINE_TOLERANCE: f64 = 0.1;
/// Braking work allowed as a fraction of traction work.
pub const BRAKING_BUDGET: f64 = 0.01;
/// Relative tolerance of the cumulative work columns.
pub const BOOKKEEPING_TOLERANCE: f64 = 1e-9;
/// Mean controller compute allowed per step, s.
pub const MEAN_COMPUTE_BUDGET: f64 = 0.050;
/// 99th percentile controller compute allowed per step, s.
pub const P99_COMPUTE_BUDGET: f64 = 0.100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

impl Outcome {
    fn of(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, outcome: Outcome, detail: impl Into<String>) -> Self {
        Self { name, outcome, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    /// SHA-256 of the trace's CSV encoding.
    pub hash: String,
}

impl Report {
    /// True when no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<18} {}", c.outcome.as_str(), c.name, c.detail)?;
        }
        write!(f, "trace sha256 {}", self.hash)
    }
}

/// Optional evidence beyond the trace itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Evidence<'a> {
    /// Controller compute times from the run's sidecar.
    pub timing: Option<&'a [TimingRecord]>,
    /// Hash of an independent rerun of the same scenario and seed.
    pub rerun_hash: Option<&'a str>,
}

pub fn verify(scenario: &Scenario, trace: &[TraceRecord], evidence: Evidence<'_>) -> Report {
    let hash = trace_hash(trace);
    let checks = vec![
        time_grid(scenario, trace),
        safety_gap(scenario, trace),
        red_light(trace),
        braking_budget(scenario, trace),
        bookkeeping(scenario, trace),
        radar_saturation(scenario, trace),
        determinism(&hash, evidence.rerun_hash),
        compute_budget(scenario, evidence.timing),
    ];
    Report { checks, hash }
}

fn time_grid(scenario: &Scenario, trace: &[TraceRecord]) -> Check {
    let expected = scenario.steps();
    if trace.len() != expected {
        return Check::new(
            "time_grid",
            Outcome::Fail,
            format!("{} records, expected {expected}", trace.len()),
        );
    }
    match trace.iter().enumerate().find(|(n, r)| r.time != *n as f64 * scenario.dt) {
        Some((n, r)) => Check::new(
            "time_grid",
            Outcome::Fail,
            format!("record {n} at t = {} off the {} s grid", r.time, scenario.dt),
        ),
        None => Check::new("time_grid", Outcome::Pass, format!("{expected} records at dt = {}", scenario.dt)),
    }
}

fn safety_gap(scenario: &Scenario, trace: &[TraceRecord]) -> Check {
    if scenario.model_mismatch {
        return Check::new("safety_gap", Outcome::Skipped, "holds for matched models only");
    }
    let d_min = scenario.mpc.d_min;
    let followed: Vec<_> = trace.iter().filter(|r| r.radar_target).collect();
    let Some(closest) = followed.iter().min_by(|a, b| a.radar_distance.total_cmp(&b.radar_distance)) else {
        return Check::new("safety_gap", Outcome::Pass, "no target detected");
    };
    match followed.iter().find(|r| r.radar_distance < d_min) {
        Some(r) => Check::new(
            "safety_gap",
            Outcome::Fail,
            format!("d = {} < {d_min} m at t = {}", r.radar_distance, r.time),
        ),
        None => Check::new(
            "safety_gap",
            Outcome::Pass,
            format!("min d = {} m at t = {}, margin {:.3e} m", closest.radar_distance, closest.time, closest.radar_distance - d_min),
        ),
    }
}

fn red_light(trace: &[TraceRecord]) -> Check {
    let red: Vec<(f64, f64)> = trace
        .iter()
        .filter(|r| r.signal_phase == PhaseCell::Red)
        .filter_map(|r| r.d_tl.map(|d| (r.time, d)))
        .collect();
    if let Some((t, d)) = red.iter().find(|(_, d)| *d < -RED_LINE_TOLERANCE) {
        return Check::new("red_light", Outcome::Fail, format!("d_tl = {d} m on red at t = {t}"));
    }
    match red.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        Some((t, d)) => Check::new(
            "red_light",
            Outcome::Pass,
            format!("{} red steps, min d_tl = {d:.3} m at t = {t}", red.len()),
        ),
        None => Check::new("red_light", Outcome::Pass, "no red phase ahead"),
    }
}

fn braking_budget(scenario: &Scenario, trace: &[TraceRecord]) -> Check {
    if scenario.model_mismatch {
        return Check::new("braking_budget", Outcome::Skipped, "holds for matched models only");
    }
    let Some(last) = trace.last() else {
        return Check::new("braking_budget", Outcome::Pass, "empty trace");
    };
    let ratio = if last.traction_work > 0.0 { last.braking_work / last.traction_work } else { 0.0 };
    let ok = last.braking_work <= BRAKING_BUDGET * last.traction_work;
    Check::new(
        "braking_budget",
        Outcome::of(ok),
        format!(
            "braking {:.1} J / traction {:.1} J = {:.3}% (budget {}%)",
            last.braking_work,
            last.traction_work,
            100.0 * ratio,
            100.0 * BRAKING_BUDGET
        ),
    )
}

fn bookkeeping(scenario: &Scenario, trace: &[TraceRecord]) -> Check {
    let dt = scenario.dt;
    let (mut traction, mut braking) = (0.0, 0.0);
    let mut worst = 0.0_f64;
    for r in trace {
        traction += r.f_t * r.velocity * dt;
        braking += r.f_b.abs() * r.velocity * dt;
        for (logged, summed) in [(r.traction_work, traction), (r.braking_work, braking)] {
            let scale = logged.abs().max(summed.abs());
            if scale > 0.0 {
                worst = worst.max((logged - summed).abs() / scale);
            }
        }
    }
    Check::new(
        "bookkeeping",
        Outcome::of(worst <= BOOKKEEPING_TOLERANCE),
        format!("max relative error {worst:.3e} (tolerance {BOOKKEEPING_TOLERANCE:e})"),
    )
}

fn radar_saturation(scenario: &Scenario, trace: &[TraceRecord]) -> Check {
    let range = scenario.radar_range;
    let empty: Vec<_> = trace.iter().filter(|r| !r.radar_target).collect();
    match empty.iter().find(|r| r.radar_distance != range) {
        Some(r) => Check::new(
            "radar_saturation",
            Outcome::Fail,
            format!("no target but d = {} at t = {}", r.radar_distance, r.time),
        ),
        None => Check::new(
            "radar_saturation",
            Outcome::Pass,
            format!("{} no-target steps read {range} m", empty.len()),
        ),
    }
}

fn determinism(hash: &str, rerun: Option<&str>) -> Check {
    match rerun {
        None => Check::new("determinism", Outcome::Skipped, "no rerun"),
        Some(other) => Check::new(
            "determinism",
            Outcome::of(other == hash),
            if other == hash { "rerun hash matches".to_string() } else { format!("rerun hash {other} differs") },
        ),
    }
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn compute_budget(scenario: &Scenario, timing: Option<&[TimingRecord]>) -> Check {
    let Some(timing) = timing.filter(|t| !t.is_empty()) else {
        return Check::new("compute_budget", Outcome::Skipped, "no timing sidecar");
    };
    let mut s: Vec<f64> = timing.iter().map(|t| t.controller_seconds).collect();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let p99 = percentile(&s, 0.99);
    let ok = mean < MEAN_COMPUTE_BUDGET && p99 < P99_COMPUTE_BUDGET;
    Check::new(
        "compute_budget",
        Outcome::of(ok),
        format!(
            "N_p = {}: mean {:.2} ms, p99 {:.2} ms, max {:.2} ms over {} steps",
            scenario.mpc.horizon,
            mean * 1e3,
            p99 * 1e3,
            s[s.len() - 1] * 1e3,
            s.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&s, 0.99), 99.0);
        assert_eq!(percentile(&s, 1.0), 100.0);
        assert_eq!(percentile(&[3.0], 0.99), 3.0);
    }
}

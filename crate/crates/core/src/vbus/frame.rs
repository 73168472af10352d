//! Typed frames and their little-endian payload encoding.
//!
//! Payload layouts (all `f64`/`u64`/`u32` little-endian):
//!
//! | kind | code | payload |
//! |------|------|---------|
//! | VehicleState | 0 | position, velocity, wheel_force, time (4 × f64) |
//! | Radar | 1 | distance, relative_velocity (2 × f64), target_present (u8) |
//! | Spat | 2 | count (u32), then per signal: stop_line, cycle, offset, green, yellow, red (6 × f64) |
//! | LeadPlan | 3 | count (u32), then per breakpoint: time, velocity (2 × f64) |
//! | Control | 4 | f_t, f_b (2 × f64) |
//! | Diagnostic | 5 | objective, solve_time (2 × f64), iterations (u32), status (u8), action (u8) |
//!
//! Diagnostic status codes: 0 Optimal, 1 MaxIter, 2 Infeasible, 255 no
//! solve. Action codes: 0 optimal, 1 shifted, 2 fallback.

use thiserror::Error;

use crate::mpc::{Action, Diagnostic};
use crate::plant::{ControlInput, PlantState};
use crate::qp::SolverStatus;
use crate::sensing::{LeadPlan, RadarReading};
use crate::signals::SignalPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKind {
    VehicleState,
    Radar,
    Spat,
    LeadPlan,
    Control,
    Diagnostic,
}

impl FrameKind {
    pub const ALL: [FrameKind; 6] = [
        FrameKind::VehicleState,
        FrameKind::Radar,
        FrameKind::Spat,
        FrameKind::LeadPlan,
        FrameKind::Control,
        FrameKind::Diagnostic,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::VehicleState => "vehicle_state",
            FrameKind::Radar => "radar",
            FrameKind::Spat => "spat",
            FrameKind::LeadPlan => "lead_plan",
            FrameKind::Control => "control",
            FrameKind::Diagnostic => "diagnostic",
        }
    }
}

/// Controller diagnostics as carried on the bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticPayload {
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: u32,
    pub status: Option<SolverStatus>,
    pub action: Action,
}

impl From<&Diagnostic> for DiagnosticPayload {
    fn from(d: &Diagnostic) -> Self {
        Self {
            objective: d.objective,
            solve_time: d.solve_time,
            iterations: d.iterations as u32,
            status: d.status,
            action: d.action,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    VehicleState(PlantState),
    Radar(RadarReading),
    Spat(Vec<SignalPlan>),
    LeadPlan(LeadPlan),
    Control(ControlInput),
    Diagnostic(DiagnosticPayload),
}

impl Payload {
    pub fn kind(&self) -> FrameKind {
        match self {
            Payload::VehicleState(_) => FrameKind::VehicleState,
            Payload::Radar(_) => FrameKind::Radar,
            Payload::Spat(_) => FrameKind::Spat,
            Payload::LeadPlan(_) => FrameKind::LeadPlan,
            Payload::Control(_) => FrameKind::Control,
            Payload::Diagnostic(_) => FrameKind::Diagnostic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub payload: Payload,
    pub publish_time: f64,
    /// Per-kind, starting at 0.
    pub sequence: u64,
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        self.payload.kind()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("unknown frame kind code {0}")]
    UnknownKind(u8),
    #[error("payload truncated")]
    Truncated,
    #[error("{0} trailing payload bytes")]
    Trailing(usize),
    #[error("invalid {field} code {code}")]
    BadCode { field: &'static str, code: u8 },
}

fn status_code(s: Option<SolverStatus>) -> u8 {
    match s {
        Some(SolverStatus::Optimal) => 0,
        Some(SolverStatus::MaxIter) => 1,
        Some(SolverStatus::Infeasible) => 2,
        None => 255,
    }
}

fn action_code(a: Action) -> u8 {
    match a {
        Action::Optimal => 0,
        Action::ShiftedPrevious => 1,
        Action::SafeFallback => 2,
    }
}

pub(crate) fn encode_payload(payload: &Payload, out: &mut Vec<u8>) {
    let f = |out: &mut Vec<u8>, x: f64| out.extend_from_slice(&x.to_le_bytes());
    match payload {
        Payload::VehicleState(s) => {
            for x in [s.position, s.velocity, s.wheel_force, s.time] {
                f(out, x);
            }
        }
        Payload::Radar(r) => {
            f(out, r.distance);
            f(out, r.relative_velocity);
            out.push(r.target_present as u8);
        }
        Payload::Spat(signals) => {
            out.extend_from_slice(&(signals.len() as u32).to_le_bytes());
            for s in signals {
                for x in [s.stop_line_position, s.cycle_length, s.offset, s.green, s.yellow, s.red] {
                    f(out, x);
                }
            }
        }
        Payload::LeadPlan(plan) => {
            out.extend_from_slice(&(plan.breakpoints.len() as u32).to_le_bytes());
            for &(t, v) in &plan.breakpoints {
                f(out, t);
                f(out, v);
            }
        }
        Payload::Control(u) => {
            f(out, u.f_t);
            f(out, u.f_b);
        }
        Payload::Diagnostic(d) => {
            f(out, d.objective);
            f(out, d.solve_time);
            out.extend_from_slice(&d.iterations.to_le_bytes());
            out.push(status_code(d.status));
            out.push(action_code(d.action));
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        if self.bytes.len() < N {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("split length"))
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        self.take::<1>().map(|b| b[0])
    }
}

pub(crate) fn decode_payload(kind: FrameKind, bytes: &[u8]) -> Result<Payload, DecodeError> {
    let mut r = Reader { bytes };
    let payload = match kind {
        FrameKind::VehicleState => Payload::VehicleState(PlantState {
            position: r.f64()?,
            velocity: r.f64()?,
            wheel_force: r.f64()?,
            time: r.f64()?,
        }),
        FrameKind::Radar => Payload::Radar(RadarReading {
            distance: r.f64()?,
            relative_velocity: r.f64()?,
            target_present: match r.u8()? {
                0 => false,
                1 => true,
                code => return Err(DecodeError::BadCode { field: "target_present", code }),
            },
        }),
        FrameKind::Spat => {
            let n = r.u32()? as usize;
            let mut signals = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                signals.push(SignalPlan {
                    stop_line_position: r.f64()?,
                    cycle_length: r.f64()?,
                    offset: r.f64()?,
                    green: r.f64()?,
                    yellow: r.f64()?,
                    red: r.f64()?,
                });
            }
            Payload::Spat(signals)
        }
        FrameKind::LeadPlan => {
            let n = r.u32()? as usize;
            let mut breakpoints = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                breakpoints.push((r.f64()?, r.f64()?));
            }
            Payload::LeadPlan(LeadPlan { breakpoints })
        }
        FrameKind::Control => Payload::Control(ControlInput { f_t: r.f64()?, f_b: r.f64()? }),
        FrameKind::Diagnostic => {
            let objective = r.f64()?;
            let solve_time = r.f64()?;
            let iterations = r.u32()?;
            let status = match r.u8()? {
                0 => Some(SolverStatus::Optimal),
                1 => Some(SolverStatus::MaxIter),
                2 => Some(SolverStatus::Infeasible),
                255 => None,
                code => return Err(DecodeError::BadCode { field: "status", code }),
            };
            let action = match r.u8()? {
                0 => Action::Optimal,
                1 => Action::ShiftedPrevious,
                2 => Action::SafeFallback,
                code => return Err(DecodeError::BadCode { field: "action", code }),
            };
            Payload::Diagnostic(DiagnosticPayload { objective, solve_time, iterations, status, action })
        }
    };
    if !r.bytes.is_empty() {
        return Err(DecodeError::Trailing(r.bytes.len()));
    }
    Ok(payload)
}

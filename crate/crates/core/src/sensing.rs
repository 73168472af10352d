//! Idealized radar, SPaT reception and front-vehicle velocity predictors.

use crate::plant::PlantState;
use crate::signals::{phase_at, Corridor, Phase, SignalPlan};
use crate::traffic::{Role, TargetVehicle};

pub const DEFAULT_RADAR_RANGE: f64 = 150.0;
pub const DEFAULT_WORST_CASE_DECEL: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarReading {
    /// Gap to the lead's rear bumper, saturated at the radar range.
    pub distance: f64,
    /// Lead minus ego; zero without a target.
    pub relative_velocity: f64,
    pub target_present: bool,
}

impl RadarReading {
    pub fn no_target(max_range: f64) -> Self {
        Self { distance: max_range, relative_velocity: 0.0, target_present: false }
    }
}

/// Nearest vehicle ahead of the ego within range. A target exactly at
/// `max_range` is not detected, so `distance == max_range` always means
/// "no target".
pub fn radar_measure(ego: &PlantState, vehicles: &[TargetVehicle], max_range: f64) -> RadarReading {
    let nearest = vehicles
        .iter()
        .filter(|v| v.role != Role::Ego && v.position > ego.position)
        .map(|v| (v.rear() - ego.position, v))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match nearest {
        Some((gap, lead)) if gap < max_range => RadarReading {
            distance: gap.max(0.0),
            relative_velocity: lead.velocity - ego.velocity,
            target_present: true,
        },
        _ => RadarReading::no_target(max_range),
    }
}

/// Velocity profile a connected lead vehicle communicates: piecewise linear
/// between `(time, velocity)` breakpoints, held constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadPlan {
    pub breakpoints: Vec<(f64, f64)>,
}

impl LeadPlan {
    pub fn constant(velocity: f64) -> Self {
        Self { breakpoints: vec![(0.0, velocity)] }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.breakpoints.is_empty() {
            return Err("lead profile needs at least one breakpoint".into());
        }
        if self.breakpoints.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err("lead profile breakpoints must be finite with velocity >= 0".into());
        }
        if self.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("lead profile times must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t <= bp[0].0 {
            return bp[0].1;
        }
        for w in bp.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t < t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        bp[bp.len() - 1].1
    }

    /// Exact integral of the velocity profile over `[0, t]`.
    pub fn distance_until(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        let mut dist = 0.0;
        let mut cursor = 0.0_f64;
        let mut v_cursor = self.velocity_at(0.0);
        let mut knots: Vec<f64> = bp.iter().map(|(k, _)| *k).filter(|k| *k > 0.0 && *k < t).collect();
        knots.push(t);
        for k in knots {
            if k <= cursor {
                continue;
            }
            let v_k = self.velocity_at(k);
            dist += 0.5 * (v_cursor + v_k) * (k - cursor);
            cursor = k;
            v_cursor = v_k;
        }
        dist
    }
}

/// Front-vehicle velocities over the horizon, one entry per step `k = 0..=N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontPrediction {
    pub velocities: Vec<f64>,
    pub kind: PredictionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    /// Communicated plan, resampled.
    Exact,
    /// Full braking until standstill.
    WorstCase,
    /// No detected target: a far lead at the top speed, so the gap row never binds.
    Virtual,
}

impl FrontPrediction {
    pub fn horizon(&self) -> usize {
        self.velocities.len() - 1
    }

    pub fn terminal(&self) -> f64 {
        self.velocities[self.velocities.len() - 1]
    }

    pub fn virtual_lead(v_max: f64, horizon: usize) -> Self {
        Self { velocities: vec![v_max; horizon + 1], kind: PredictionKind::Virtual }
    }
}

pub fn predict_front_exact(
    lead_velocity_now: f64,
    plan: &LeadPlan,
    now: f64,
    horizon: usize,
    dt: f64,
) -> FrontPrediction {
    let mut velocities = Vec::with_capacity(horizon + 1);
    velocities.push(lead_velocity_now.max(0.0));
    for k in 1..=horizon {
        velocities.push(plan.velocity_at(now + k as f64 * dt).max(0.0));
    }
    FrontPrediction { velocities, kind: PredictionKind::Exact }
}

/// `v(k) = max(0, v_now - a_brake·k·dt)`.
pub fn predict_front_worst_case(
    lead_velocity_now: f64,
    a_brake_max: f64,
    horizon: usize,
    dt: f64,
) -> FrontPrediction {
    let velocities = (0..=horizon)
        .map(|k| (lead_velocity_now - a_brake_max * k as f64 * dt).max(0.0))
        .collect();
    FrontPrediction { velocities, kind: PredictionKind::WorstCase }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpcomingSignal {
    pub signal_index: usize,
    pub stop_line_position: f64,
    /// Stop line minus ego position; negative only after running a red.
    pub d_tl: f64,
    /// Phase at `t + k·dt` for `k = 0..=N_p`.
    pub schedule: Vec<Phase>,
}

impl UpcomingSignal {
    pub fn red_in_horizon(&self) -> bool {
        self.schedule.contains(&Phase::Red)
    }
}

/// `None` once the ego is past the last signal.
pub type SpatSnapshot = Option<UpcomingSignal>;

/// Snapshot for the first signal strictly ahead of `ego_position`.
pub fn spat_snapshot(
    ego_position: f64,
    corridor: &Corridor,
    time: f64,
    horizon: usize,
    dt: f64,
) -> SpatSnapshot {
    let idx = corridor.next_signal(ego_position)?;
    Some(snapshot_for(idx, &corridor.signals[idx], ego_position, time, horizon, dt))
}

pub fn snapshot_for(
    signal_index: usize,
    plan: &SignalPlan,
    ego_position: f64,
    time: f64,
    horizon: usize,
    dt: f64,
) -> UpcomingSignal {
    UpcomingSignal {
        signal_index,
        stop_line_position: plan.stop_line_position,
        d_tl: plan.stop_line_position - ego_position,
        schedule: (0..=horizon).map(|k| phase_at(plan, time + k as f64 * dt)).collect(),
    }
}

/// Which stop line the ego is currently heading for. The target only moves
/// on once the ego is over the line while the light is not red, so running
/// a red shows up as a negative `d_tl`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignalTracker {
    target: usize,
}

impl SignalTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(position: f64, signals: &[SignalPlan]) -> Self {
        Self {
            target: signals
                .iter()
                .position(|s| s.stop_line_position > position)
                .unwrap_or(signals.len()),
        }
    }

    pub fn update(&mut self, position: f64, time: f64, signals: &[SignalPlan]) {
        while let Some(plan) = signals.get(self.target) {
            if position >= plan.stop_line_position && phase_at(plan, time) != Phase::Red {
                self.target += 1;
            } else {
                break;
            }
        }
    }

    pub fn target(&self, signals: &[SignalPlan]) -> Option<usize> {
        (self.target < signals.len()).then_some(self.target)
    }

    pub fn snapshot(
        &self,
        position: f64,
        signals: &[SignalPlan],
        time: f64,
        horizon: usize,
        dt: f64,
    ) -> SpatSnapshot {
        let idx = self.target(signals)?;
        Some(snapshot_for(idx, &signals[idx], position, time, horizon, dt))
    }
}

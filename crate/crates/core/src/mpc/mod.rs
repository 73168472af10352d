//! Eco-driving adaptive cruise control as a receding-horizon QP.
//!
//! Per solve the controller linearizes the road load about the measured
//! speed, condenses the affine prediction model over the horizon, and
//! minimizes speed-tracking error plus a quadratic braking penalty subject
//! to gap, speed, input, red-light and coasting-terminal constraints.

mod coasting;
mod controller;
mod cost;
mod model;
mod problem;

pub use coasting::{
    coasting_is_safe, coasting_min_gap, compute_coasting_family, compute_coasting_set,
    compute_coasting_set_for, CoastingError, CoastingFamily,
    CoastingSet, FrontAssumption, Secant,
};
pub use controller::{
    safe_fallback, Action, ActiveCensus, Controller, ControllerError, ControllerOutput, Diagnostic,
    Measurements, PredictorMode, Stamped,
};
pub use cost::{eval_cost, Trajectory};
pub use model::{prediction_model_f, AffineRoadLoad, Condensed, StateRows};
pub use problem::{build_qp, MpcQp, MpcSolution, QpLayout, RowFamily, FORCE_UNIT};

use thiserror::Error;

use crate::plant::PlantParams;
use crate::qp::QpSettings;

#[derive(Debug, Error, PartialEq)]
#[error("invalid MPC configuration `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

/// When the red-light rows are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedTrigger {
    /// Any red phase anywhere in the horizon schedule.
    AnyRed,
    /// Only if the light is red at or after the ego's constant-speed arrival.
    Arrival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon, steps.
    pub horizon: usize,
    /// s
    pub dt: f64,
    /// m/s
    pub v_des: f64,
    /// Weight on `(v - v_des)^2`.
    pub q_weight: f64,
    /// Weight on `F_b^2`.
    pub b_weight: f64,
    pub d_min: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Traction upper bound, N.
    pub f_max: f64,
    /// Braking lower bound, N (negative).
    pub f_min: f64,
    /// Vehicle model the controller predicts with.
    pub model: PlantParams,
    /// Rollout length for the coasting set, steps.
    pub coast_steps: usize,
    /// Number of velocity grid segments for the coasting set.
    pub coast_grid: usize,
    /// Front braking rate assumed by the worst-case predictor, m/s².
    pub a_brake_max: f64,
    /// Linear penalty per metre on the gap and red-light slacks.
    pub slack_weight: f64,
    /// Linear penalty per metre on the terminal-set slack.
    pub terminal_slack_weight: f64,
    pub red_trigger: RedTrigger,
    pub solver: QpSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: 0.1,
            v_des: 13.9,
            q_weight: 1.0,
            b_weight: 1e-4,
            d_min: 5.0,
            v_min: 0.0,
            v_max: 20.0,
            f_max: 4000.0,
            f_min: -8000.0,
            model: PlantParams::default(),
            coast_steps: 200,
            coast_grid: 32,
            a_brake_max: crate::sensing::DEFAULT_WORST_CASE_DECEL,
            slack_weight: 1e6,
            terminal_slack_weight: 1e5,
            red_trigger: RedTrigger::AnyRed,
            solver: QpSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field, reason: &str| Err(ConfigError { field, reason: reason.into() });
        if self.horizon < 1 {
            return fail("horizon", "must be >= 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return fail("dt", "must be > 0");
        }
        if !(self.q_weight.is_finite() && self.q_weight > 0.0) {
            return fail("q_weight", "must be > 0");
        }
        if !(self.b_weight.is_finite() && self.b_weight >= 0.0) {
            return fail("b_weight", "must be >= 0");
        }
        if !(self.v_min <= self.v_des && self.v_des <= self.v_max) {
            return fail("v_des", "must satisfy v_min <= v_des <= v_max");
        }
        if !(self.f_min < 0.0 && 0.0 < self.f_max) {
            return fail("f_min/f_max", "must satisfy f_min < 0 < f_max");
        }
        if !(self.d_min.is_finite() && self.d_min > 0.0) {
            return fail("d_min", "must be > 0");
        }
        if self.coast_steps < 1 {
            return fail("coast_steps", "must be >= 1");
        }
        if self.coast_grid < 1 {
            return fail("coast_grid", "must be >= 1");
        }
        if !(self.a_brake_max.is_finite() && self.a_brake_max > 0.0) {
            return fail("a_brake_max", "must be > 0");
        }
        if !(self.slack_weight > 0.0 && self.terminal_slack_weight > 0.0) {
            return fail("slack_weight", "must be > 0");
        }
        self.model.validate().map_err(|e| ConfigError { field: "model", reason: e.to_string() })
    }
}

/// MPC state: gap to the front vehicle, speed, wheel force and, on the
/// urban corridor, distance to the targeted stop line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredictionState {
    pub d: f64,
    pub v: f64,
    pub f: f64,
    pub d_tl: Option<f64>,
}

//! Longitudinal point-mass vehicle with a first-order actuator lag and a
//! quadratic road load.
//!
//! The plant is the software twin of the vehicle/powertrain simulator. It is
//! deliberately small: explicit Euler at the controller step, so that with
//! matching parameters the controller's prediction model and the plant agree
//! step for step.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("invalid plant parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: &'static str },
    #[error("non-finite input to plant_step ({0})")]
    NonFinite(&'static str),
    #[error("invalid control input: {0}")]
    InvalidInput(&'static str),
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
}

/// Physical parameters of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// kg
    pub mass: f64,
    /// Actuator time constant, s.
    pub actuator_time_constant: f64,
    /// N
    pub road_load_c0: f64,
    /// N·s/m
    pub road_load_c1: f64,
    /// N·s²/m²
    pub road_load_c2: f64,
    /// Optional slew limit on the delivered force, N/s.
    pub force_rate_limit: Option<f64>,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 1800.0,
            actuator_time_constant: 0.3,
            road_load_c0: 120.0,
            road_load_c1: 2.5,
            road_load_c2: 0.4,
            force_rate_limit: None,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |field, reason| Err(PlantError::InvalidParam { field, reason });
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass", "must be finite and > 0");
        }
        if !(self.actuator_time_constant.is_finite() && self.actuator_time_constant > 0.0) {
            return bad("actuator_time_constant", "must be finite and > 0");
        }
        for (field, c) in [
            ("road_load_c0", self.road_load_c0),
            ("road_load_c1", self.road_load_c1),
            ("road_load_c2", self.road_load_c2),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return bad(field, "must be finite and >= 0");
            }
        }
        if let Some(r) = self.force_rate_limit {
            if !(r.is_finite() && r > 0.0) {
                return bad("force_rate_limit", "must be finite and > 0 when present");
            }
        }
        Ok(())
    }
}

/// Ground-truth ego state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Front-bumper position along the corridor, m.
    pub position: f64,
    /// m/s, never negative.
    pub velocity: f64,
    /// Delivered wheel force after the actuator lag, N.
    pub wheel_force: f64,
    /// s
    pub time: f64,
}

/// Desired wheel forces: traction `f_t >= 0` and braking `f_b <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub f_t: f64,
    pub f_b: f64,
}

impl ControlInput {
    pub const COAST: ControlInput = ControlInput { f_t: 0.0, f_b: 0.0 };

    pub fn new(f_t: f64, f_b: f64) -> Result<Self, PlantError> {
        let u = Self { f_t, f_b };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !self.f_t.is_finite() || !self.f_b.is_finite() {
            return Err(PlantError::NonFinite("control input"));
        }
        if self.f_t < 0.0 {
            return Err(PlantError::InvalidInput("traction force must be >= 0"));
        }
        if self.f_b > 0.0 {
            return Err(PlantError::InvalidInput("braking force must be <= 0"));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.f_t + self.f_b
    }
}

/// Road load `c0 + c1·v + c2·v²`.
pub fn resistive_force(v: f64, params: &PlantParams) -> f64 {
    params.road_load_c0 + params.road_load_c1 * v + params.road_load_c2 * v * v
}

/// Advances the plant by one explicit Euler step.
///
/// The delivered force relaxes toward `f_t + f_b` with time constant τ
/// (optionally slew limited); velocity integrates the net force and never
/// goes negative; position integrates the pre-step velocity.
pub fn plant_step(
    state: &PlantState,
    input: &ControlInput,
    dt: f64,
    params: &PlantParams,
) -> Result<PlantState, PlantError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(PlantError::InvalidDt(dt));
    }
    if !(state.position.is_finite()
        && state.velocity.is_finite()
        && state.wheel_force.is_finite()
        && state.time.is_finite())
    {
        return Err(PlantError::NonFinite("plant state"));
    }
    input.validate()?;

    let target = input.total();
    let mut delta = (dt / params.actuator_time_constant) * (target - state.wheel_force);
    if let Some(rate) = params.force_rate_limit {
        let max_delta = rate * dt;
        delta = delta.clamp(-max_delta, max_delta);
    }
    let wheel_force = state.wheel_force + delta;

    let v = state.velocity;
    let resistance = resistive_force(v, params);
    let velocity = if v <= 0.0 && state.wheel_force <= resistance {
        // resistance holds a stopped vehicle, it never pushes it backwards
        0.0
    } else {
        (v + (dt / params.mass) * (state.wheel_force - resistance)).max(0.0)
    };

    Ok(PlantState {
        position: state.position + dt * v,
        velocity,
        wheel_force,
        time: state.time + dt,
    })
}

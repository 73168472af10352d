//! Receding-horizon controller: one QP per call, first input applied.

use thiserror::Error;

use super::{
    coasting::{compute_coasting_family, CoastingError, CoastingFamily},
    problem::{build_qp, MpcQp, MpcSolution, RowFamily},
    ConfigError, MpcConfig, PredictionState,
};
use crate::plant::{ControlInput, PlantState};
use crate::qp::SolverStatus;
use crate::sensing::{
    predict_front_exact, predict_front_worst_case, FrontPrediction, LeadPlan, PredictionKind,
    RadarReading, SignalTracker,
};
use crate::signals::SignalPlan;

/// How far a shifted previous plan may violate the new problem's rows (m,
/// m/s or kN) beyond the unavoidable slack and still be applied after an
/// iteration cap. Covers one step of plant/model disagreement.
const SHIFTED_PLAN_TOLERANCE: f64 = 0.05;
/// Frames older than this many steps are stale.
const STALE_STEPS: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coasting(#[from] CoastingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorMode {
    /// Communicated lead plan when available, worst case otherwise.
    Exact,
    /// Always the worst-case braking front.
    WorstCase,
}

/// A received value with its publish time.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamped<T> {
    pub value: T,
    pub publish_time: f64,
}

impl<T> Stamped<T> {
    pub fn new(value: T, publish_time: f64) -> Self {
        Self { value, publish_time }
    }
}

/// Freshest frames available to the controller at `now`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub now: f64,
    pub vehicle: Option<Stamped<PlantState>>,
    pub radar: Option<Stamped<RadarReading>>,
    /// Signal plans along the corridor, ordered by stop line.
    pub signals: Option<Stamped<Vec<SignalPlan>>>,
    pub lead_plan: Option<Stamped<LeadPlan>>,
}

/// Rows sitting at one of their bounds in the returned solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActiveCensus {
    pub input_box: usize,
    pub gap: usize,
    pub velocity: usize,
    pub terminal: usize,
    pub red_light: usize,
    /// Soft families whose slack is positive.
    pub softened: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Action {
    #[serde(rename = "optimal")]
    Optimal,
    #[serde(rename = "shifted")]
    ShiftedPrevious,
    #[serde(rename = "fallback")]
    SafeFallback,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Optimal => "optimal",
            Action::ShiftedPrevious => "shifted",
            Action::SafeFallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub time: f64,
    /// `NaN` when no QP was solved.
    pub objective: f64,
    pub status: Option<SolverStatus>,
    pub iterations: usize,
    pub solve_time: f64,
    pub census: ActiveCensus,
    pub action: Action,
    pub predictor: Option<PredictionKind>,
    pub red_active: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub control: ControlInput,
    pub diagnostic: Diagnostic,
    pub solution: Option<MpcSolution>,
}

/// Zero traction and just enough braking to stop within
/// `available_distance`, capped at full braking.
pub fn safe_fallback(velocity: f64, available_distance: f64, config: &MpcConfig) -> ControlInput {
    let v = velocity.max(0.0);
    let kappa = if v == 0.0 {
        0.0
    } else if available_distance <= 0.0 {
        1.0
    } else {
        let needed = config.model.mass * v * v / (2.0 * available_distance);
        (needed / config.f_min.abs()).clamp(0.0, 1.0)
    };
    ControlInput { f_t: 0.0, f_b: config.f_min * kappa }
}

pub struct Controller {
    config: MpcConfig,
    predictor: PredictorMode,
    constant_front: CoastingFamily,
    braking_front: CoastingFamily,
    tracker: Option<SignalTracker>,
    previous: Option<(MpcQp, MpcSolution)>,
    /// Inputs of the last optimal solve and the steps applied since.
    plan: Option<(Vec<ControlInput>, usize)>,
}

impl Controller {
    pub fn new(config: MpcConfig, predictor: PredictorMode) -> Result<Self, ControllerError> {
        config.validate()?;
        let constant_front = compute_coasting_family(&config, 0.0)?;
        let braking_front = compute_coasting_family(&config, config.a_brake_max)?;
        Ok(Self {
            config,
            predictor,
            constant_front,
            braking_front,
            tracker: None,
            previous: None,
            plan: None,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn coasting_family(&self, kind: PredictionKind) -> &CoastingFamily {
        match kind {
            PredictionKind::WorstCase => &self.braking_front,
            PredictionKind::Exact | PredictionKind::Virtual => &self.constant_front,
        }
    }

    /// Drops warm-start memory and the stop-line target.
    pub fn reset(&mut self) {
        self.tracker = None;
        self.previous = None;
        self.plan = None;
    }

    fn fallback(
        &mut self,
        m: &Measurements,
        velocity: f64,
        distance: f64,
        note: String,
    ) -> ControllerOutput {
        self.previous = None;
        self.plan = None;
        ControllerOutput {
            control: safe_fallback(velocity, distance, &self.config),
            diagnostic: Diagnostic {
                time: m.now,
                objective: f64::NAN,
                status: None,
                iterations: 0,
                solve_time: 0.0,
                census: ActiveCensus::default(),
                action: Action::SafeFallback,
                predictor: None,
                red_active: false,
                note: Some(note),
            },
            solution: None,
        }
    }

    fn predict(&self, ego_v: f64, radar: &RadarReading, m: &Measurements) -> FrontPrediction {
        let cfg = &self.config;
        if !radar.target_present {
            return FrontPrediction::virtual_lead(cfg.v_max, cfg.horizon);
        }
        let lead_v = (ego_v + radar.relative_velocity).max(0.0);
        match (&self.predictor, &m.lead_plan) {
            (PredictorMode::Exact, Some(plan)) => {
                predict_front_exact(lead_v, &plan.value, m.now, cfg.horizon, cfg.dt)
            }
            _ => predict_front_worst_case(lead_v, cfg.a_brake_max, cfg.horizon, cfg.dt),
        }
    }

    fn census(qp: &MpcQp, sol: &MpcSolution) -> ActiveCensus {
        let problem = &qp.problem;
        let mut z = sol.raw.x.clone();
        qp.clip_inputs(&mut z);
        let az = &problem.a * &z;
        let at_bound = |i: usize| {
            let tol = 1e-5 * (1.0 + az[i].abs());
            (az[i] - problem.l[i]).abs() <= tol || (az[i] - problem.u[i]).abs() <= tol
        };
        let count = |family: RowFamily| {
            qp.layout.range(family).map_or(0, |r| r.filter(|&i| at_bound(i)).count())
        };
        ActiveCensus {
            input_box: count(RowFamily::InputBox),
            gap: count(RowFamily::Gap),
            velocity: count(RowFamily::VelocityLower) + count(RowFamily::VelocityUpper),
            terminal: count(RowFamily::Terminal),
            red_light: count(RowFamily::RedLight),
            softened: sol.slacks.iter().filter(|&&s| s > 1e-6).count(),
        }
    }

    pub fn step(&mut self, m: &Measurements) -> ControllerOutput {
        let stale_after = STALE_STEPS * self.config.dt + 1e-9;
        let (Some(vehicle), Some(radar)) = (&m.vehicle, &m.radar) else {
            let v = m.vehicle.as_ref().map_or(0.0, |s| s.value.velocity);
            return self.fallback(m, v, 0.0, "missing vehicle or radar frame".into());
        };
        let ego = vehicle.value;
        let stale = [
            Some(("vehicle", vehicle.publish_time)),
            Some(("radar", radar.publish_time)),
            m.signals.as_ref().map(|s| ("spat", s.publish_time)),
        ]
        .into_iter()
        .flatten()
        .find(|(_, t)| m.now - t > stale_after);
        if let Some((kind, t)) = stale {
            let note = format!("stale {kind} frame ({:.3} s old)", m.now - t);
            return self.fallback(m, ego.velocity, radar.value.distance - self.config.d_min, note);
        }

        let signals: &[SignalPlan] = m.signals.as_ref().map_or(&[], |s| &s.value);
        let tracker = self
            .tracker
            .get_or_insert_with(|| SignalTracker::starting_at(ego.position, signals));
        tracker.update(ego.position, m.now, signals);
        let spat = tracker.snapshot(ego.position, signals, m.now, self.config.horizon, self.config.dt);

        let front = self.predict(ego.velocity, &radar.value, m);
        let family = self.coasting_family(front.kind);
        let coasting = family.select(front.terminal());
        let x0 = PredictionState {
            d: radar.value.distance,
            v: ego.velocity,
            f: ego.wheel_force,
            d_tl: spat.as_ref().map(|s| s.d_tl),
        };
        let qp = build_qp(&x0, &front, &spat, &self.config, coasting);
        let warm = self
            .previous
            .as_ref()
            .map(|(prev_qp, prev_sol)| qp.shifted_warm_start(prev_qp, &prev_sol.raw));
        let sol = qp.solve(warm.as_ref());

        let (control, action, note) = match sol.status {
            SolverStatus::Optimal => {
                self.plan = Some((sol.inputs.clone(), 0));
                (sol.first_input(), Action::Optimal, None)
            }
            status => {
                let shifted = self.plan.as_ref().and_then(|(inputs, age)| {
                    let n = inputs.len();
                    let flat: Vec<f64> = (0..n)
                        .flat_map(|k| {
                            let u = inputs[(k + age + 1).min(n - 1)];
                            [u.f_t, u.f_b]
                        })
                        .collect();
                    (qp.unavoidable_violation(&flat) <= SHIFTED_PLAN_TOLERANCE)
                        .then(|| ControlInput { f_t: flat[0], f_b: flat[1] })
                });
                match shifted {
                    Some(u) => {
                        if let Some((_, age)) = self.plan.as_mut() {
                            *age += 1;
                        }
                        let note = format!("{} after {} iterations", status.as_str(), sol.iterations);
                        (u, Action::ShiftedPrevious, Some(note))
                    }
                    None => {
                        self.plan = None;
                        let mut room = radar.value.distance - self.config.d_min;
                        if let Some(s) = spat.as_ref().filter(|s| s.red_in_horizon()) {
                            room = room.min(s.d_tl);
                        }
                        (
                            safe_fallback(ego.velocity, room, &self.config),
                            Action::SafeFallback,
                            Some(format!("{} and no feasible shifted plan", status.as_str())),
                        )
                    }
                }
            }
        };

        let diagnostic = Diagnostic {
            time: m.now,
            objective: sol.objective,
            status: Some(sol.status),
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            census: Self::census(&qp, &sol),
            action,
            predictor: Some(front.kind),
            red_active: qp.red_active,
            note,
        };
        self.previous = Some((qp, sol.clone()));
        ControllerOutput { control, diagnostic, solution: Some(sol) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_scales_with_room() {
        let cfg = MpcConfig::default();
        assert_eq!(safe_fallback(0.0, 10.0, &cfg).f_b, 0.0);
        assert_eq!(safe_fallback(10.0, 0.0, &cfg).f_b, cfg.f_min);
        // 1800·100/(2·100) = 900 N
        let u = safe_fallback(10.0, 100.0, &cfg);
        assert!((u.f_b + 900.0).abs() < 1e-9);
        assert_eq!(u.f_t, 0.0);
    }

    #[test]
    fn stale_frames_trigger_fallback() {
        let cfg = MpcConfig { coast_grid: 4, coast_steps: 20, ..Default::default() };
        let mut ctl = Controller::new(cfg, PredictorMode::WorstCase).unwrap();
        let ego = PlantState { position: 0.0, velocity: 10.0, wheel_force: 0.0, time: 0.0 };
        let m = Measurements {
            now: 1.0,
            vehicle: Some(Stamped::new(ego, 0.5)),
            radar: Some(Stamped::new(RadarReading::no_target(150.0), 1.0)),
            signals: None,
            lead_plan: None,
        };
        let out = ctl.step(&m);
        assert_eq!(out.diagnostic.action, Action::SafeFallback);
        assert!(out.diagnostic.note.unwrap().contains("vehicle"));
    }
}

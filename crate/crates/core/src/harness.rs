//! Closed-loop executor.
//!
//! Per tick `n` (time `n·dt`):
//!
//! 1. for `n > 0`, traffic advances from the previous tick and the plant
//!    integrates the held control over the same interval;
//! 2. vehicle state, radar, signal plans and (every tenth tick by default)
//!    the lead plan are published;
//! 3. the controller consumes the freshest frames and publishes control and
//!    diagnostics;
//! 4. the control visible to the plant at this tick becomes the held
//!    command, and a trace record is written.
//!
//! The ego is inserted into the traffic list every tick so background
//! vehicles react to it.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::mpc::{Action, Controller, ControllerError, ControllerOutput, Measurements, Stamped};
use crate::plant::{plant_step, ControlInput, PlantError, PlantParams, PlantState};
use crate::scenario::Scenario;
use crate::sensing::{radar_measure, LeadPlan, RadarReading, SignalTracker};
use crate::signals::{phase_at, SignalPlan};
use crate::trace::{PhaseCell, TimingRecord, TraceRecord};
use crate::traffic::{Role, TargetVehicle, Traffic, TrafficError, TrafficStats, VehicleId};
use crate::vbus::{Bus, BusConfig, BusError, BusMode, DiagnosticPayload, Frame, FrameKind, Payload};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("traffic: {0}")]
    Traffic(#[from] TrafficError),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("bus: {0}")]
    Bus(#[from] BusError),
    #[error("controller thread panicked")]
    ActorPanic,
}

/// How frames travel between the environment and the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    /// Through a lockstep [`Bus`] configured from the scenario.
    Bus,
    /// Direct hand-over of the latest value; ignores latency and drops.
    Direct,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub trace: Vec<TraceRecord>,
    pub timing: Vec<TimingRecord>,
    pub traffic: TrafficStats,
    /// Steps whose controller compute exceeded `dt`.
    pub deadline_misses: usize,
    /// Published frames, when the bus was recording.
    pub frames: Vec<Frame>,
}

/// Simulated world: plant, traffic, the scripted lead and bookkeeping.
struct Environment<'a> {
    scenario: &'a Scenario,
    plant: PlantParams,
    state: PlantState,
    traffic: Traffic,
    tracker: SignalTracker,
    lead_present: bool,
    held: ControlInput,
    traction_work: f64,
    braking_work: f64,
    step: usize,
}

impl<'a> Environment<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let state = PlantState {
            position: scenario.ego_start.position,
            velocity: scenario.ego_start.velocity,
            wheel_force: 0.0,
            time: 0.0,
        };
        let mut env = Self {
            scenario,
            plant: scenario.true_plant(),
            state,
            traffic: Traffic::new(&scenario.demand, scenario.corridor.signals.len()),
            tracker: SignalTracker::starting_at(state.position, &scenario.corridor.signals),
            lead_present: scenario.lead.is_some(),
            held: ControlInput::COAST,
            traction_work: 0.0,
            braking_work: 0.0,
            step: 0,
        };
        env.sync_actors();
        env
    }

    fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    fn ego_vehicle(&self) -> TargetVehicle {
        TargetVehicle::new(
            VehicleId::EGO,
            self.state.position,
            self.state.velocity,
            self.scenario.demand.vehicle_length,
            Role::Ego,
        )
    }

    /// Puts the ego and the lead at their current states in the traffic list.
    fn sync_actors(&mut self) {
        self.traffic.upsert(self.ego_vehicle());
        let t = self.time();
        if let Some(lead) = &self.scenario.lead {
            if self.lead_present && lead.exit_time.is_some_and(|te| t >= te) {
                self.lead_present = false;
                self.traffic.remove(VehicleId::LEAD);
            }
            if self.lead_present {
                self.traffic.upsert(TargetVehicle::new(
                    VehicleId::LEAD,
                    lead.position_at(t),
                    lead.plan.velocity_at(t).max(0.0),
                    lead.length,
                    Role::Scripted,
                ));
            }
        }
    }

    /// Advances everything by one step under the held control.
    fn advance(&mut self) -> Result<(), HarnessError> {
        let (t, dt) = (self.time(), self.scenario.dt);
        self.traffic.step(&self.scenario.corridor, &self.scenario.demand, t, dt)?;
        self.state = plant_step(&self.state, &self.held, dt, &self.plant)?;
        self.step += 1;
        self.state.time = self.time();
        self.sync_actors();
        self.tracker.update(self.state.position, self.time(), &self.scenario.corridor.signals);
        Ok(())
    }

    fn radar(&self) -> RadarReading {
        radar_measure(&self.state, self.traffic.vehicles(), self.scenario.radar_range)
    }

    fn lead_plan_due(&self, bus: &BusConfig) -> bool {
        self.lead_present && due(self.step, bus.period(FrameKind::LeadPlan), self.scenario.dt)
    }

    fn record(&mut self, control: ControlInput, diag: &DiagnosticPayload) -> TraceRecord {
        let dt = self.scenario.dt;
        let v = self.state.velocity;
        self.held = control;
        self.traction_work += control.f_t * v * dt;
        self.braking_work += control.f_b.abs() * v * dt;
        let signals = &self.scenario.corridor.signals;
        let target = self.tracker.target(signals);
        let radar = self.radar();
        TraceRecord {
            time: self.time(),
            position: self.state.position,
            velocity: v,
            wheel_force: self.state.wheel_force,
            f_t: control.f_t,
            f_b: control.f_b,
            radar_distance: radar.distance,
            radar_relative_velocity: radar.relative_velocity,
            radar_target: radar.target_present,
            signal_index: target,
            d_tl: target.map(|i| signals[i].stop_line_position - self.state.position),
            signal_phase: PhaseCell::from(target.map(|i| phase_at(&signals[i], self.time()))),
            status: diag.status,
            action: diag.action,
            objective: diag.objective,
            iterations: diag.iterations,
            traction_work: self.traction_work,
            braking_work: self.braking_work,
        }
    }
}

fn due(step: usize, period: f64, dt: f64) -> bool {
    let every = ((period / dt).round() as usize).max(1);
    step.is_multiple_of(every)
}

const NO_DIAGNOSTIC: DiagnosticPayload = DiagnosticPayload {
    objective: f64::NAN,
    solve_time: 0.0,
    iterations: 0,
    status: None,
    action: Action::SafeFallback,
};

/// Runs the controller, turning a panic into a safe-fallback output.
fn guarded_step(controller: &mut Controller, m: &Measurements) -> ControllerOutput {
    match catch_unwind(AssertUnwindSafe(|| controller.step(m))) {
        Ok(out) => out,
        Err(_) => {
            controller.reset();
            let v = m.vehicle.as_ref().map_or(0.0, |s| s.value.velocity);
            let room = m.radar.as_ref().map_or(0.0, |s| s.value.distance - controller.config().d_min);
            let mut out = ControllerOutput {
                control: crate::mpc::safe_fallback(v, room, controller.config()),
                diagnostic: crate::mpc::Diagnostic {
                    time: m.now,
                    objective: f64::NAN,
                    status: None,
                    iterations: 0,
                    solve_time: 0.0,
                    census: Default::default(),
                    action: Action::SafeFallback,
                    predictor: None,
                    red_active: false,
                    note: None,
                },
                solution: None,
            };
            out.diagnostic.note = Some("controller panicked".into());
            log::warn!("controller panicked at t={}", m.now);
            out
        }
    }
}

fn build_controller(scenario: &Scenario) -> Result<Controller, HarnessError> {
    Ok(Controller::new(scenario.mpc.clone(), scenario.predictor)?)
}

fn poll_measurements(bus: &Bus, now: f64) -> Measurements {
    let take = |kind| bus.poll_latest(kind, now).map(|p| p.frame);
    Measurements {
        now,
        vehicle: take(FrameKind::VehicleState).and_then(|f| match f.payload {
            Payload::VehicleState(s) => Some(Stamped::new(s, f.publish_time)),
            _ => None,
        }),
        radar: take(FrameKind::Radar).and_then(|f| match f.payload {
            Payload::Radar(r) => Some(Stamped::new(r, f.publish_time)),
            _ => None,
        }),
        signals: take(FrameKind::Spat).and_then(|f| match f.payload {
            Payload::Spat(s) => Some(Stamped::new(s, f.publish_time)),
            _ => None,
        }),
        lead_plan: take(FrameKind::LeadPlan).and_then(|f| match f.payload {
            Payload::LeadPlan(p) => Some(Stamped::new(p, f.publish_time)),
            _ => None,
        }),
    }
}

fn publish_sensors(env: &Environment, bus: &Bus, now: f64) -> Result<(), HarnessError> {
    let cfg = bus.config();
    let dt = env.scenario.dt;
    if due(env.step, cfg.period(FrameKind::VehicleState), dt) {
        bus.publish(Payload::VehicleState(env.state), now)?;
    }
    if due(env.step, cfg.period(FrameKind::Radar), dt) {
        bus.publish(Payload::Radar(env.radar()), now)?;
    }
    if due(env.step, cfg.period(FrameKind::Spat), dt) {
        bus.publish(Payload::Spat(env.scenario.corridor.signals.clone()), now)?;
    }
    if env.lead_plan_due(cfg) {
        if let Some(lead) = &env.scenario.lead {
            bus.publish(Payload::LeadPlan(lead.plan.clone()), now)?;
        }
    }
    Ok(())
}

fn control_from(bus: &Bus, now: f64) -> (ControlInput, DiagnosticPayload) {
    let control = match bus.poll_latest(FrameKind::Control, now).map(|p| p.frame.payload) {
        Some(Payload::Control(u)) => u,
        _ => ControlInput::COAST,
    };
    let diag = match bus.poll_latest(FrameKind::Diagnostic, now).map(|p| p.frame.payload) {
        Some(Payload::Diagnostic(d)) => d,
        _ => NO_DIAGNOSTIC,
    };
    (control, diag)
}

/// Lockstep episode over the scenario's bus.
pub fn run_episode(scenario: &Scenario) -> Result<Episode, HarnessError> {
    run_episode_with(scenario, Wiring::Bus)
}

pub fn run_episode_with(scenario: &Scenario, wiring: Wiring) -> Result<Episode, HarnessError> {
    let steps = scenario.steps();
    let mut controller = build_controller(scenario)?;
    let mut env = Environment::new(scenario);
    let bus = Bus::new(BusConfig { mode: BusMode::Lockstep, ..scenario.bus.clone() })?;
    let mut trace = Vec::with_capacity(steps);
    let mut timing = Vec::with_capacity(steps);
    let mut deadline_misses = 0;
    let mut last_plan: Option<Stamped<LeadPlan>> = None;
    let signals: Vec<SignalPlan> = scenario.corridor.signals.clone();

    for n in 0..steps {
        if n > 0 {
            env.advance()?;
        }
        let now = env.time();
        let started = Instant::now();
        let (control, diag) = match wiring {
            Wiring::Bus => {
                publish_sensors(&env, &bus, now)?;
                let m = poll_measurements(&bus, now);
                let out = guarded_step(&mut controller, &m);
                bus.publish(Payload::Control(out.control), now)?;
                bus.publish(Payload::Diagnostic(DiagnosticPayload::from(&out.diagnostic)), now)?;
                control_from(&bus, now)
            }
            Wiring::Direct => {
                if env.lead_plan_due(&scenario.bus) {
                    last_plan = scenario.lead.as_ref().map(|l| Stamped::new(l.plan.clone(), now));
                }
                let m = Measurements {
                    now,
                    vehicle: Some(Stamped::new(env.state, now)),
                    radar: Some(Stamped::new(env.radar(), now)),
                    signals: Some(Stamped::new(signals.clone(), now)),
                    lead_plan: last_plan.clone(),
                };
                let out = guarded_step(&mut controller, &m);
                (out.control, DiagnosticPayload::from(&out.diagnostic))
            }
        };
        let seconds = started.elapsed().as_secs_f64();
        if seconds > scenario.dt {
            deadline_misses += 1;
        }
        timing.push(TimingRecord { step: n, time: now, controller_seconds: seconds });
        trace.push(env.record(control, &diag));
    }
    Ok(Episode {
        trace,
        timing,
        traffic: env.traffic.stats(),
        deadline_misses,
        frames: bus.recorded(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealtimeOptions {
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
}

impl Default for RealtimeOptions {
    fn default() -> Self {
        Self { speed: 1.0 }
    }
}

/// Soft-real-time episode: an environment actor on the calling thread and a
/// controller actor on a second thread, exchanging frames only through an
/// async bus. The plant holds the last control it received.
pub fn run_realtime(scenario: &Scenario, options: RealtimeOptions) -> Result<Episode, HarnessError> {
    assert!(options.speed > 0.0, "speed must be positive");
    let steps = scenario.steps();
    let mut controller = build_controller(scenario)?;
    let bus = Bus::new(BusConfig { mode: BusMode::Async, ..scenario.bus.clone() })?;
    let stop = AtomicBool::new(false);
    let origin = Instant::now();
    let sim_now = || origin.elapsed().as_secs_f64() * options.speed;
    let wall_at = |sim: f64| origin + Duration::from_secs_f64(sim / options.speed);
    let dt = scenario.dt;

    std::thread::scope(|scope| {
        let ctl_bus = bus.clone();
        let stop_ref = &stop;
        let worker = scope.spawn(move || {
            let mut timing = Vec::new();
            let mut last_seq = None;
            while !stop_ref.load(Ordering::Acquire) {
                let now = sim_now();
                let fresh = ctl_bus
                    .poll_latest(FrameKind::VehicleState, now)
                    .map(|p| p.frame.sequence)
                    .filter(|s| Some(*s) != last_seq);
                let Some(seq) = fresh else {
                    std::thread::sleep(Duration::from_micros(200));
                    continue;
                };
                last_seq = Some(seq);
                let m = poll_measurements(&ctl_bus, now);
                let started = Instant::now();
                let out = guarded_step(&mut controller, &m);
                let seconds = started.elapsed().as_secs_f64();
                let at = sim_now();
                // publish times only move forward on this thread
                let _ = ctl_bus.publish(Payload::Control(out.control), at);
                let _ = ctl_bus.publish(Payload::Diagnostic(DiagnosticPayload::from(&out.diagnostic)), at);
                timing.push(TimingRecord { step: seq as usize, time: m.now, controller_seconds: seconds });
            }
            timing
        });

        let result = (|| -> Result<(Vec<TraceRecord>, TrafficStats), HarnessError> {
            let mut env = Environment::new(scenario);
            let mut trace = Vec::with_capacity(steps);
            for n in 0..steps {
                if n > 0 {
                    env.advance()?;
                }
                let now = env.time();
                std::thread::sleep(wall_at(now).saturating_duration_since(Instant::now()));
                publish_sensors(&env, &bus, now)?;
                let next = now + dt;
                std::thread::sleep(wall_at(next).saturating_duration_since(Instant::now()));
                let (control, diag) = control_from(&bus, next);
                trace.push(env.record(control, &diag));
            }
            Ok((trace, env.traffic.stats()))
        })();
        stop.store(true, Ordering::Release);
        let timing = worker.join().map_err(|_| HarnessError::ActorPanic)?;
        let (trace, traffic) = result?;
        let deadline_misses = timing.iter().filter(|t| t.controller_seconds * options.speed > dt).count();
        Ok(Episode { trace, timing, traffic, deadline_misses, frames: bus.recorded() })
    })
}
